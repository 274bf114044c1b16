#include "hrvnet/signal.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "hrvnet/errors.hpp"

namespace hrvnet::signal {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double magnitude_of_cascade(const std::vector<Biquad>& sections, double f_hz, double fs) {
    const double w = 2.0 * kPi * f_hz / fs;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h{1.0, 0.0};
    for (const Biquad& s : sections) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return std::abs(h);
}

}  // namespace

double EcgRecord::duration_s() const {
    return sampling_rate_hz > 0 ? static_cast<double>(samples.size()) / sampling_rate_hz : 0.0;
}

void EcgRecord::validate() const {
    if (sampling_rate_hz <= 0.0) {
        throw ValidationError("EcgRecord: sampling rate must be positive");
    }
    if (samples.empty()) {
        throw ValidationError("EcgRecord: samples must be non-empty");
    }
    for (double v : samples) {
        if (!std::isfinite(v)) {
            throw ValidationError("EcgRecord: non-finite sample value");
        }
    }
}

FilterSpec FilterSpec::butterworth_bandpass(double low_hz, double high_hz, int order, double fs) {
    if (fs <= 0.0) {
        throw ValidationError("bandpass design: sampling rate must be positive");
    }
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0)) {
        throw ValidationError("bandpass design: need 0 < low < high < fs/2 (band inverted or out of range)");
    }
    if (order < 2 || order % 2 != 0) {
        throw ValidationError("bandpass design: order must be even and >= 2");
    }

    // Prewarped analog edge frequencies for the bilinear transform.
    const double wl = 2.0 * fs * std::tan(kPi * low_hz / fs);
    const double wh = 2.0 * fs * std::tan(kPi * high_hz / fs);
    const double bw = wh - wl;
    const double w0sq = wl * wh;

    FilterSpec spec;
    spec.low_hz_ = low_hz;
    spec.high_hz_ = high_hz;
    spec.order_ = order;
    spec.fs_ = fs;

    // Low-pass prototype poles in the upper half plane; conjugates are implied.
    // Each prototype pole maps to two band-pass poles, and each band-pass pole
    // together with its conjugate forms one biquad with zeros at z = +/-1.
    for (int k = 1; k <= order / 2; ++k) {
        const double theta = kPi * (2.0 * k + order - 1.0) / (2.0 * order);
        const std::complex<double> proto{std::cos(theta), std::sin(theta)};
        const std::complex<double> bp = bw * proto;
        const std::complex<double> disc = std::sqrt(bp * bp - 4.0 * w0sq);
        for (const std::complex<double>& s : {(bp + disc) / 2.0, (bp - disc) / 2.0}) {
            const std::complex<double> zp = (2.0 * fs + s) / (2.0 * fs - s);
            if (std::abs(zp) >= 1.0) {
                throw NumericalError("bandpass design: pole on or outside the unit circle");
            }
            spec.sections_.push_back(Biquad{1.0, 0.0, -1.0, -2.0 * zp.real(), std::norm(zp)});
        }
    }

    // Normalize to unit gain at the (prewarp-consistent) geometric band center,
    // with the correction spread evenly across sections.
    const double f_center = fs / kPi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
    const double mag = magnitude_of_cascade(spec.sections_, f_center, fs);
    if (!(mag > 0.0) || !std::isfinite(mag)) {
        throw NumericalError("bandpass design: degenerate response at band center");
    }
    const double g = std::pow(1.0 / mag, 1.0 / static_cast<double>(spec.sections_.size()));
    for (Biquad& s : spec.sections_) {
        s.b0 *= g;
        s.b1 *= g;
        s.b2 *= g;
    }
    return spec;
}

std::complex<double> FilterSpec::response_at(double f_hz) const {
    const double w = 2.0 * kPi * f_hz / fs_;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h{1.0, 0.0};
    for (const Biquad& s : sections_) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return h;
}

double FilterSpec::group_delay_samples(double f_hz) const {
    const double df = 1e-4;  // Hz
    const auto phase = [this](double f) { return std::arg(response_at(f)); };
    double p1 = phase(f_hz - df);
    double p2 = phase(f_hz + df);
    double dp = p2 - p1;
    while (dp > kPi) dp -= 2.0 * kPi;
    while (dp < -kPi) dp += 2.0 * kPi;
    const double dw = 2.0 * kPi * (2.0 * df) / fs_;
    return -dp / dw;
}

std::vector<double> filter_samples(std::span<const double> x, const FilterSpec& spec) {
    std::vector<double> y(x.begin(), x.end());
    for (const Biquad& s : spec.sections()) {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

std::vector<double> apply_filter(const EcgRecord& record, const FilterSpec& spec) {
    record.validate();
    if (std::abs(record.sampling_rate_hz - spec.sampling_rate_hz()) >
        1e-9 * std::max(1.0, record.sampling_rate_hz)) {
        throw ValidationError("apply_filter: filter designed for a different sampling rate");
    }
    return filter_samples(record.samples, spec);
}

std::vector<double> pt_derivative(std::span<const double> x, double fs) {
    if (x.size() < 5) {
        throw ValidationError("pt_derivative: need at least 5 samples");
    }
    const auto at = [&x](std::ptrdiff_t i) { return i < 0 ? 0.0 : x[static_cast<size_t>(i)]; };
    std::vector<double> y(x.size());
    const double scale = fs / 8.0;
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(x.size()); ++n) {
        y[n] = scale * (2.0 * at(n) + at(n - 1) - at(n - 3) - 2.0 * at(n - 4));
    }
    return y;
}

std::vector<double> rectify(std::span<const double> x) {
    std::vector<double> y(x.size());
    std::transform(x.begin(), x.end(), y.begin(), [](double v) { return std::abs(v); });
    return y;
}

std::vector<double> moving_window_integrate(std::span<const double> x, double window_ms, double fs) {
    if (!(window_ms > 0.0)) {
        throw ValidationError("moving_window_integrate: window must be positive");
    }
    const long w = std::lround(window_ms * fs / 1000.0);
    if (w < 1) {
        throw ValidationError("moving_window_integrate: window shorter than one sample");
    }
    std::vector<double> y(x.size());
    double acc = 0.0;
    for (size_t n = 0; n < x.size(); ++n) {
        acc += x[n];
        if (n >= static_cast<size_t>(w)) {
            acc -= x[n - w];
        }
        const double count = static_cast<double>(std::min<size_t>(n + 1, static_cast<size_t>(w)));
        y[n] = acc / count;
    }
    return y;
}

namespace {

struct Candidate {
    long index;
    double value;
};

// Running mean of the last up-to-8 RR intervals, in samples.
double rr_average(const std::vector<long>& qrs) {
    if (qrs.size() < 2) return 0.0;
    const size_t n_intervals = std::min<size_t>(qrs.size() - 1, 8);
    double sum = 0.0;
    for (size_t i = qrs.size() - n_intervals; i < qrs.size(); ++i) {
        sum += static_cast<double>(qrs[i] - qrs[i - 1]);
    }
    return sum / static_cast<double>(n_intervals);
}

}  // namespace

RPeakSeries detect_r_peaks(const EcgRecord& record) {
    return detect_r_peaks(record, kBandLowHz, kBandHighHz, kFilterOrder);
}

RPeakSeries detect_r_peaks(const EcgRecord& record, double band_low_hz, double band_high_hz,
                           int filter_order) {
    record.validate();
    const double fs = record.sampling_rate_hz;
    if (record.duration_s() < 2.0) {
        throw ValidationError("detect_r_peaks: need at least 2 s of data for threshold initialization");
    }

    const FilterSpec spec = FilterSpec::butterworth_bandpass(band_low_hz, band_high_hz, filter_order, fs);
    const std::vector<double> bp = filter_samples(record.samples, spec);
    const std::vector<double> der = pt_derivative(bp, fs);
    const std::vector<double> rec = rectify(der);
    const std::vector<double> mwi = moving_window_integrate(rec, kIntegrationWindowMs, fs);

    const long n = static_cast<long>(mwi.size());
    const long w_int = std::lround(kIntegrationWindowMs * fs / 1000.0);
    const long refractory = std::lround(kRefractoryS * fs);

    // Fiducial candidates: local maxima of the integrated signal.
    std::vector<Candidate> cands;
    for (long i = 1; i + 1 < n; ++i) {
        if (mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1]) {
            cands.push_back({i, mwi[i]});
        }
    }

    // Threshold initialization from the first two seconds.
    const long init_n = std::min<long>(n, std::lround(2.0 * fs));
    double spki = *std::max_element(mwi.begin(), mwi.begin() + init_n);
    double npki = std::accumulate(mwi.begin(), mwi.begin() + init_n, 0.0) / static_cast<double>(init_n);
    double thr = npki + 0.25 * (spki - npki);

    std::vector<long> qrs;

    const auto searchback = [&](long now) {
        const double rr_avg = rr_average(qrs);
        if (rr_avg <= 0.0 || qrs.empty()) return;
        if (static_cast<double>(now - qrs.back()) <= 1.66 * rr_avg) return;
        const long lo = qrs.back() + refractory;
        const Candidate* best = nullptr;
        for (const Candidate& c : cands) {
            if (c.index <= lo || c.index >= now) continue;
            if (c.value > 0.5 * thr && (!best || c.value > best->value)) {
                best = &c;
            }
        }
        if (best) {
            qrs.push_back(best->index);
            spki = 0.25 * best->value + 0.75 * spki;
            thr = npki + 0.25 * (spki - npki);
        }
    };

    for (const Candidate& c : cands) {
        searchback(c.index);
        if (!qrs.empty() && c.index - qrs.back() < refractory) {
            continue;  // ripple inside the same QRS complex
        }
        if (c.value > thr) {
            qrs.push_back(c.index);
            spki = 0.125 * c.value + 0.875 * spki;
        } else {
            npki = 0.125 * c.value + 0.875 * npki;
        }
        thr = npki + 0.25 * (spki - npki);
    }
    searchback(n);

    // Refine each detection back onto the raw signal. The fiducial sits on the
    // integrated signal; locate the band-passed QRS inside the window the
    // integrator covered, undo the filter group delay, then take the raw
    // maximum within +/-50 ms.
    const long bp_delay = std::lround(spec.group_delay_samples(std::sqrt(band_low_hz * band_high_hz)));
    const long refine_w = std::lround(kPeakRefineHalfWidthS * fs);
    std::vector<long> refined;
    for (long i : qrs) {
        const long j0 = std::max<long>(0, i - w_int + 1);
        long j = j0;
        for (long k = j0; k <= i; ++k) {
            if (std::abs(bp[k]) > std::abs(bp[j])) j = k;
        }
        const long center = j - bp_delay;
        const long r0 = std::max<long>(0, center - refine_w);
        const long r1 = std::min<long>(n - 1, center + refine_w);
        if (r0 > r1) continue;
        long p = r0;
        for (long k = r0; k <= r1; ++k) {
            if (record.samples[k] > record.samples[p]) p = k;
        }
        refined.push_back(p);
    }

    // Refinement can reorder or merge neighbours; re-impose the refractory
    // rule, keeping the larger raw amplitude on collision.
    std::sort(refined.begin(), refined.end());
    std::vector<long> kept;
    for (long p : refined) {
        if (!kept.empty() && p - kept.back() < refractory) {
            if (record.samples[p] > record.samples[kept.back()]) {
                kept.back() = p;
            }
        } else {
            kept.push_back(p);
        }
    }

    RPeakSeries out;
    out.source_subject = record.subject_id;
    out.peak_times_s.reserve(kept.size());
    for (long p : kept) {
        out.peak_times_s.push_back(static_cast<double>(p) / fs);
    }
    return out;
}

WindowingResult segment_windows(const RPeakSeries& peaks, double record_duration_s) {
    WindowingResult result;
    if (record_duration_s < kWindowLengthS) {
        result.duration_too_short = true;
        return result;
    }
    for (double start = 0.0; start + kWindowLengthS <= record_duration_s + 1e-9;
         start += kWindowStepS) {
        Window win;
        win.start_s = start;
        win.length_s = kWindowLengthS;
        for (double t : peaks.peak_times_s) {
            if (t >= start && t < start + kWindowLengthS) {
                win.peak_times_s.push_back(t);
            }
        }
        result.windows.push_back(std::move(win));
    }
    return result;
}

}  // namespace hrvnet::signal
