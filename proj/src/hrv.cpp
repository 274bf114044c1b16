#include "hrvnet/hrv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hrvnet/errors.hpp"

namespace hrvnet::hrv {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double sample_sd(std::span<const double> values, double mean) {
    if (values.size() < 2) return 0.0;
    double acc = 0.0;
    for (double v : values) {
        acc += (v - mean) * (v - mean);
    }
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace

RrSeries rr_intervals(const signal::RPeakSeries& peaks) {
    if (peaks.peak_times_s.size() < 2) {
        throw ValidationError("rr_intervals: insufficient beats (need >= 2 peaks)");
    }
    RrSeries rr;
    for (size_t i = 0; i + 1 < peaks.peak_times_s.size(); ++i) {
        const double interval_ms = (peaks.peak_times_s[i + 1] - peaks.peak_times_s[i]) * 1000.0;
        if (interval_ms > kMinValidRrMs && interval_ms < kMaxValidRrMs) {
            rr.intervals_ms.push_back(interval_ms);
            rr.onset_times_s.push_back(peaks.peak_times_s[i]);
        }
    }
    return rr;
}

TimeFeatures time_domain_features(const RrSeries& rr) {
    const auto& x = rr.intervals_ms;
    if (x.size() < 3) {
        throw ValidationError("time_domain_features: need >= 3 RR intervals");
    }

    TimeFeatures f;
    f.rr_min = *std::min_element(x.begin(), x.end());
    f.rr_max = *std::max_element(x.begin(), x.end());
    f.rr_diff = f.rr_max - f.rr_min;
    f.rr_mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    f.rr_sd = sample_sd(x, f.rr_mean);
    f.rr_cv = f.rr_sd / f.rr_mean;

    std::vector<double> diffs(x.size() - 1);
    for (size_t i = 0; i + 1 < x.size(); ++i) {
        diffs[i] = x[i + 1] - x[i];
    }
    double sq = 0.0;
    long nn50 = 0;
    for (double d : diffs) {
        sq += d * d;
        if (std::abs(d) > 50.0) ++nn50;
    }
    f.rmssd = std::sqrt(sq / static_cast<double>(diffs.size()));
    const double diff_mean =
        std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
    f.sdsd = sample_sd(diffs, diff_mean);
    f.nn50 = static_cast<double>(nn50);
    f.pnn50 = 100.0 * static_cast<double>(nn50) / static_cast<double>(diffs.size());
    f.hr = 60000.0 / f.rr_mean;
    return f;
}

std::vector<double> lomb_power(std::span<const double> times_s, std::span<const double> values,
                               std::span<const double> freqs_hz) {
    if (times_s.size() != values.size()) {
        throw ValidationError("lomb_power: times and values must have equal length");
    }
    const size_t n = values.size();
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    std::vector<double> centered(n);
    for (size_t i = 0; i < n; ++i) {
        centered[i] = values[i] - mean;
    }

    std::vector<double> power(freqs_hz.size(), 0.0);
    for (size_t k = 0; k < freqs_hz.size(); ++k) {
        const double w = 2.0 * kPi * freqs_hz[k];
        double s2 = 0.0, c2 = 0.0;
        for (double t : times_s) {
            s2 += std::sin(2.0 * w * t);
            c2 += std::cos(2.0 * w * t);
        }
        const double tau = std::atan2(s2, c2) / (2.0 * w);

        double xc = 0.0, xs = 0.0, cc = 0.0, ss = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double arg = w * (times_s[i] - tau);
            const double c = std::cos(arg);
            const double s = std::sin(arg);
            xc += centered[i] * c;
            xs += centered[i] * s;
            cc += c * c;
            ss += s * s;
        }
        double p = 0.0;
        if (cc > 0.0) p += xc * xc / cc;
        if (ss > 0.0) p += xs * xs / ss;
        power[k] = 0.5 * p;
    }
    return power;
}

Psd lomb_psd(const RrSeries& rr) {
    if (rr.intervals_ms.size() < 4) {
        throw ValidationError("lomb_psd: need >= 4 RR intervals");
    }
    if (rr.onset_times_s.size() != rr.intervals_ms.size()) {
        throw ValidationError("lomb_psd: onset times and intervals must align");
    }
    const double span = rr.onset_times_s.back() - rr.onset_times_s.front();
    if (!(span > 0.0)) {
        throw ValidationError("lomb_psd: degenerate time span");
    }

    Psd psd;
    const int bins = static_cast<int>(std::lround(kPsdGridMaxHz / kPsdGridStepHz));
    psd.freqs_hz.resize(bins);
    for (int k = 0; k < bins; ++k) {
        psd.freqs_hz[k] = kPsdGridStepHz * static_cast<double>(k + 1);
    }
    psd.power = lomb_power(rr.onset_times_s, rr.intervals_ms, psd.freqs_hz);

    // Calibrate to ms^2 totals: the rectangle-rule integral over the grid
    // must equal the variance of the interval series.
    const double n = static_cast<double>(rr.intervals_ms.size());
    const double mean =
        std::accumulate(rr.intervals_ms.begin(), rr.intervals_ms.end(), 0.0) / n;
    double variance = 0.0;
    for (double v : rr.intervals_ms) {
        variance += (v - mean) * (v - mean);
    }
    variance /= n;

    const double integral =
        std::accumulate(psd.power.begin(), psd.power.end(), 0.0) * kPsdGridStepHz;
    if (integral > 0.0) {
        const double scale = variance / integral;
        for (double& p : psd.power) {
            p *= scale;
        }
    }
    return psd;
}

double band_power(const Psd& psd, double lo_hz, double hi_hz) {
    if (!(lo_hz >= 0.0) || !(lo_hz < hi_hz)) {
        throw ValidationError("band_power: need 0 <= lo < hi");
    }
    if (psd.freqs_hz.size() != psd.power.size()) {
        throw ValidationError("band_power: malformed PSD");
    }
    double acc = 0.0;
    for (size_t k = 0; k < psd.freqs_hz.size(); ++k) {
        const double f = psd.freqs_hz[k];
        if (f < lo_hz || f >= hi_hz) continue;
        const double width = k > 0 ? psd.freqs_hz[k] - psd.freqs_hz[k - 1]
                                   : (psd.freqs_hz.size() > 1 ? psd.freqs_hz[1] - psd.freqs_hz[0]
                                                              : psd.freqs_hz[0]);
        acc += psd.power[k] * width;
    }
    return acc;
}

std::optional<FreqFeatures> frequency_domain_features(const Psd& psd) {
    FreqFeatures f;
    f.ulf = band_power(psd, 0.0, 0.003);
    f.vlf = band_power(psd, 0.003, 0.04);
    f.lf = band_power(psd, 0.04, 0.15);
    f.hf = band_power(psd, 0.15, 0.4);
    f.total_power = band_power(psd, 0.0, 0.4);
    if (!(f.hf > 0.0)) {
        return std::nullopt;  // ratio features undefined
    }
    const double mf = band_power(psd, 0.08, 0.15);
    f.lf_norm = 100.0 * f.lf / (f.lf + f.hf);
    f.hf_norm = 100.0 * f.hf / (f.lf + f.hf);
    f.lf_hf_ratio = f.lf / f.hf;
    f.lfmf_hf_ratio = (f.lf + mf) / f.hf;
    return f;
}

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names = {
        "rr_min",    "rr_max",    "rr_diff",  "rr_mean",     "rr_sd",
        "rr_cv",     "rmssd",     "sdsd",     "nn50",        "pnn50",
        "hr",        "ulf_power", "vlf_power", "lf_power",   "hf_power",
        "total_power", "lf_norm", "hf_norm",  "lf_hf_ratio", "lfmf_hf_ratio",
    };
    return names;
}

void FeatureVector::validate() const {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError("FeatureVector: non-finite feature value for subject " +
                                  subject_id);
        }
    }
}

FeatureVector make_feature_vector(std::string subject_id, double window_start_s,
                                  signal::SegmentKind kind, const TimeFeatures& t,
                                  const FreqFeatures& f) {
    FeatureVector fv;
    fv.subject_id = std::move(subject_id);
    fv.window_start_s = window_start_s;
    fv.segment_kind = kind;
    fv.values = {t.rr_min, t.rr_max, t.rr_diff, t.rr_mean, t.rr_sd,
                 t.rr_cv,  t.rmssd,  t.sdsd,    t.nn50,    t.pnn50,
                 t.hr,     f.ulf,    f.vlf,     f.lf,      f.hf,
                 f.total_power, f.lf_norm, f.hf_norm, f.lf_hf_ratio, f.lfmf_hf_ratio};
    fv.validate();
    return fv;
}

FeatureVector normalize_features(const FeatureVector& window_features,
                                 const FeatureVector& baseline_features,
                                 NormalizationMode mode) {
    if (window_features.subject_id != baseline_features.subject_id) {
        throw ValidationError("normalize_features: subject mismatch (" +
                              window_features.subject_id + " vs " +
                              baseline_features.subject_id + ")");
    }
    if (baseline_features.segment_kind != signal::SegmentKind::baseline) {
        throw ValidationError("normalize_features: reference vector is not from a baseline segment");
    }

    FeatureVector out = window_features;
    for (int j = 0; j < kFeatureCount; ++j) {
        const double w = window_features.values[j];
        const double b = baseline_features.values[j];
        if (mode == NormalizationMode::difference) {
            out.values[j] = w - b;
        } else if (std::abs(b) > kNormalizationEps) {
            out.values[j] = w / b;
        } else {
            out.values[j] = std::clamp(w / kNormalizationEps, -kNormalizationClamp,
                                       kNormalizationClamp);
            std::fprintf(stderr,
                         "[hrvnet] warning: near-zero baseline for feature %s of subject %s; "
                         "normalized value clamped\n",
                         std::string(feature_names()[j]).c_str(),
                         window_features.subject_id.c_str());
        }
    }
    return out;
}

}  // namespace hrvnet::hrv
