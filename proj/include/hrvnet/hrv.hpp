#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hrvnet/signal.hpp"

namespace hrvnet::hrv {

// Successive inter-beat intervals with the onset time of each interval's
// first peak, the form needed for uneven-sampling spectral analysis.
struct RrSeries {
    std::vector<double> intervals_ms;
    std::vector<double> onset_times_s;
};

inline constexpr double kMinValidRrMs = 200.0;
inline constexpr double kMaxValidRrMs = 3000.0;

// Intervals outside (200, 3000) ms are dropped together with their onsets.
// Requires >= 2 peaks.
RrSeries rr_intervals(const signal::RPeakSeries& peaks);

struct TimeFeatures {
    double rr_min = 0.0;
    double rr_max = 0.0;
    double rr_diff = 0.0;
    double rr_mean = 0.0;
    double rr_sd = 0.0;    // sample standard deviation (n-1)
    double rr_cv = 0.0;    // rr_sd / rr_mean
    double rmssd = 0.0;    // RMS of successive differences
    double sdsd = 0.0;     // sample standard deviation of successive differences
    double nn50 = 0.0;     // count of successive differences with |d| > 50 ms
    double pnn50 = 0.0;    // 100 * nn50 / (#intervals - 1)
    double hr = 0.0;       // 60000 / rr_mean, bpm
};

// Requires >= 3 intervals.
TimeFeatures time_domain_features(const RrSeries& rr);

// Power spectral density on an increasing frequency grid, powers in ms^2/Hz.
struct Psd {
    std::vector<double> freqs_hz;
    std::vector<double> power;
};

// Canonical analysis grid: 0.001 .. 0.5 Hz in 0.001 Hz steps.
inline constexpr double kPsdGridStepHz = 0.001;
inline constexpr double kPsdGridMaxHz = 0.5;

// Raw Lomb periodogram of mean-removed values at arbitrary times, evaluated
// on the given frequencies. Units: values^2 (classic half-sum form).
std::vector<double> lomb_power(std::span<const double> times_s, std::span<const double> values,
                               std::span<const double> freqs_hz);

// Lomb periodogram of the tachogram on the canonical grid, rescaled so the
// rectangle-rule integral over the grid equals the series variance.
// Requires >= 4 intervals spanning a positive time range.
Psd lomb_psd(const RrSeries& rr);

// Rectangle-rule integral over grid points with lo_hz <= f < hi_hz.
double band_power(const Psd& psd, double lo_hz, double hi_hz);

struct FreqFeatures {
    double ulf = 0.0;          // (0, 0.003) Hz
    double vlf = 0.0;          // [0.003, 0.04)
    double lf = 0.0;           // [0.04, 0.15)
    double hf = 0.0;           // [0.15, 0.4)
    double total_power = 0.0;  // (0, 0.4)
    double lf_norm = 0.0;      // 100 * lf / (lf + hf)
    double hf_norm = 0.0;      // 100 * hf / (lf + hf)
    double lf_hf_ratio = 0.0;
    double lfmf_hf_ratio = 0.0;  // (lf + mf) / hf, mf = [0.08, 0.15)
};

// Returns nullopt when the HF band carries no power (ratio features would be
// undefined); such windows are excluded from the dataset.
std::optional<FreqFeatures> frequency_domain_features(const Psd& psd);

inline constexpr int kFeatureCount = 20;

// Canonical feature order: the 11 time-domain features then the 9
// frequency-domain features.
const std::array<std::string_view, kFeatureCount>& feature_names();

struct FeatureVector {
    std::string subject_id;
    double window_start_s = 0.0;
    signal::SegmentKind segment_kind = signal::SegmentKind::simulation;
    std::array<double, kFeatureCount> values{};

    // Throws ValidationError if any value is non-finite.
    void validate() const;
};

FeatureVector make_feature_vector(std::string subject_id, double window_start_s,
                                  signal::SegmentKind kind, const TimeFeatures& t,
                                  const FreqFeatures& f);

enum class NormalizationMode { ratio, difference };

inline constexpr double kNormalizationEps = 1e-9;
inline constexpr double kNormalizationClamp = 1e9;

// Per-feature normalization of a window against the subject's baseline.
// ratio: window / baseline (guarded when |baseline| <= 1e-9, clamped to
// +/-1e9); difference: window - baseline. Subjects must match and the
// baseline vector must come from a baseline segment.
FeatureVector normalize_features(const FeatureVector& window_features,
                                 const FeatureVector& baseline_features,
                                 NormalizationMode mode = NormalizationMode::ratio);

}  // namespace hrvnet::hrv
