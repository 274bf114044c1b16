#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace hrvnet::signal {

enum class SegmentKind { baseline, simulation };

// Uniformly sampled single-channel ECG trace, amplitudes in millivolts.
struct EcgRecord {
    std::string subject_id;
    std::vector<double> samples;
    double sampling_rate_hz = 0.0;
    SegmentKind segment_kind = SegmentKind::simulation;

    double duration_s() const;
    // Throws ValidationError on empty samples, non-finite values or rate <= 0.
    void validate() const;
};

// One second-order section, direct form II transposed. a0 is normalized to 1.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

// Band-pass filter as a cascade of biquads with a distributed overall gain.
class FilterSpec {
public:
    // Butterworth band-pass via analog prototype + bilinear transform with
    // frequency prewarping. `order` is the low-pass prototype order; the
    // band-pass cascade has `order` sections (2*order poles). Requires
    // 0 < low_hz < high_hz < fs/2 and an even order >= 2.
    static FilterSpec butterworth_bandpass(double low_hz, double high_hz, int order, double fs);

    const std::vector<Biquad>& sections() const { return sections_; }
    double low_cut_hz() const { return low_hz_; }
    double high_cut_hz() const { return high_hz_; }
    int order() const { return order_; }
    double sampling_rate_hz() const { return fs_; }

    // Complex frequency response H(e^{j 2 pi f / fs}).
    std::complex<double> response_at(double f_hz) const;
    // Group delay -dphi/domega in samples, evaluated by central difference.
    double group_delay_samples(double f_hz) const;

private:
    FilterSpec() = default;
    std::vector<Biquad> sections_;
    double low_hz_ = 0.0, high_hz_ = 0.0, fs_ = 0.0;
    int order_ = 0;
};

// Causal cascade filtering with zero initial state. Output length = input length.
std::vector<double> filter_samples(std::span<const double> x, const FilterSpec& spec);

// Checks that the spec was designed for the record's sampling rate.
std::vector<double> apply_filter(const EcgRecord& record, const FilterSpec& spec);

// Five-point derivative y[n] = (fs/8)*(2x[n] + x[n-1] - x[n-3] - 2x[n-4]),
// with x zero-padded before n = 0. Requires length >= 5.
std::vector<double> pt_derivative(std::span<const double> x, double fs);

std::vector<double> rectify(std::span<const double> x);

// Trailing mean over round(window_ms*fs/1000) samples; the leading partial
// windows average over however many samples exist so far.
std::vector<double> moving_window_integrate(std::span<const double> x, double window_ms, double fs);

// Detected beat times in seconds from record start, strictly increasing,
// consecutive peaks at least kRefractoryS apart.
struct RPeakSeries {
    std::vector<double> peak_times_s;
    std::string source_subject;
};

inline constexpr double kRefractoryS = 0.2;
inline constexpr double kBandLowHz = 5.0;
inline constexpr double kBandHighHz = 15.0;
inline constexpr int kFilterOrder = 4;
inline constexpr double kIntegrationWindowMs = 150.0;
inline constexpr double kPeakRefineHalfWidthS = 0.05;

// Full detection chain: band-pass -> derivative -> rectify -> integrate ->
// adaptive thresholding with search-back, then refinement of each candidate
// to the raw-signal maximum within +/-50 ms. Requires >= 2 s of data.
RPeakSeries detect_r_peaks(const EcgRecord& record);
RPeakSeries detect_r_peaks(const EcgRecord& record, double band_low_hz, double band_high_hz,
                           int filter_order);

struct Window {
    double start_s = 0.0;
    double length_s = 10.0;
    std::vector<double> peak_times_s;  // peaks in [start_s, start_s + length_s)

    // Windows with fewer than 4 peaks cannot support the downstream
    // feature set (needs >= 3 RR intervals).
    bool usable() const { return peak_times_s.size() >= 4; }
};

inline constexpr double kWindowLengthS = 10.0;
inline constexpr double kWindowStepS = 5.0;

struct WindowingResult {
    std::vector<Window> windows;
    bool duration_too_short = false;
};

// Windows start at 0, 5, 10, ... while start + 10 <= duration. A duration
// below 10 s yields an empty result with the warning flag set.
WindowingResult segment_windows(const RPeakSeries& peaks, double record_duration_s);

}  // namespace hrvnet::signal
