#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hrvnet/errors.hpp"
#include "hrvnet/signal.hpp"
#include "hrvnet/synth.hpp"

using namespace hrvnet;
using namespace hrvnet::signal;

namespace {

EcgRecord make_record(std::vector<double> samples, double fs = 500.0,
                      const std::string& id = "t") {
    EcgRecord r;
    r.subject_id = id;
    r.samples = std::move(samples);
    r.sampling_rate_hz = fs;
    return r;
}

// Steady-state amplitude of a sinusoidal response, measured after the
// transient has decayed.
double steady_amplitude(const std::vector<double>& y, size_t skip) {
    double amp = 0.0;
    for (size_t i = skip; i < y.size(); ++i) {
        amp = std::max(amp, std::abs(y[i]));
    }
    return amp;
}

}  // namespace

TEST_CASE("bandpass design meets the response contract") {
    const FilterSpec spec = FilterSpec::butterworth_bandpass(5, 15, 4, 500);
    CHECK(spec.sections().size() == 4);

    CHECK(std::abs(spec.response_at(10.0)) >= 0.9);
    CHECK(std::abs(spec.response_at(0.5)) <= 0.01);
    CHECK(std::abs(spec.response_at(60.0)) <= 0.01);
    CHECK(std::abs(spec.response_at(0.0)) <= 1e-12);  // exact zeros at DC
    for (double f = 6.0; f <= 14.0; f += 0.25) {
        CHECK(std::abs(spec.response_at(f)) >= 0.7);
    }
    // attenuation everywhere past 4x the upper edge
    for (double f = 60.0; f < 250.0; f += 10.0) {
        CHECK(std::abs(spec.response_at(f)) <= 0.01);
    }
}

TEST_CASE("bandpass design rejects bad bands and orders") {
    CHECK_THROWS_AS(FilterSpec::butterworth_bandpass(15, 5, 4, 500), ValidationError);
    CHECK_THROWS_AS(FilterSpec::butterworth_bandpass(5, 300, 4, 500), ValidationError);
    CHECK_THROWS_AS(FilterSpec::butterworth_bandpass(5, 15, 3, 500), ValidationError);
    CHECK_THROWS_AS(FilterSpec::butterworth_bandpass(5, 15, 0, 500), ValidationError);
    CHECK_THROWS_AS(FilterSpec::butterworth_bandpass(0, 15, 4, 500), ValidationError);
}

TEST_CASE("bandpass poles are strictly stable") {
    for (int order : {2, 4, 6}) {
        const FilterSpec spec = FilterSpec::butterworth_bandpass(5, 15, order, 500);
        for (const Biquad& s : spec.sections()) {
            // |poles|^2 = a2 for a conjugate pair; also require a1 within the
            // stability triangle.
            CHECK(s.a2 < 1.0);
            CHECK(std::abs(s.a1) < 1.0 + s.a2);
        }
    }
}

TEST_CASE("filtering a constant drives the output to zero") {
    const FilterSpec spec = FilterSpec::butterworth_bandpass(5, 15, 4, 500);
    const std::vector<double> dc(3000, 1.0);
    const std::vector<double> y = filter_samples(dc, spec);
    CHECK(std::abs(y.back()) < 1e-6);
}

TEST_CASE("apply_filter basics") {
    const FilterSpec spec = FilterSpec::butterworth_bandpass(5, 15, 4, 500);

    SUBCASE("zero in, zero out") {
        const EcgRecord rec = make_record(std::vector<double>(1000, 0.0));
        const std::vector<double> y = apply_filter(rec, spec);
        CHECK(y.size() == 1000);
        for (double v : y) CHECK(v == 0.0);
    }

    SUBCASE("impulse response decays below 1e-6 within 2 s") {
        std::vector<double> x(2000, 0.0);
        x[0] = 1.0;
        const std::vector<double> y = filter_samples(x, spec);
        for (size_t i = 1000; i < y.size(); ++i) {
            CHECK(std::abs(y[i]) < 1e-6);
        }
    }

    SUBCASE("10 Hz sinusoid passes at close to unit gain") {
        std::vector<double> x(5000);
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(i) / 500.0);
        }
        const std::vector<double> y = filter_samples(x, spec);
        const double amp = steady_amplitude(y, 2500);
        CHECK(amp >= 0.9);
        CHECK(amp <= 1.0 + 1e-6);
    }

    SUBCASE("sampling-rate mismatch is rejected") {
        const EcgRecord rec = make_record(std::vector<double>(1000, 0.0), 250.0);
        CHECK_THROWS_AS(apply_filter(rec, spec), ValidationError);
    }

    SUBCASE("bounded input gives bounded output") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::vector<double> x(4000);
        for (double& v : x) v = unit(rng);
        const std::vector<double> y = filter_samples(x, spec);
        for (double v : y) CHECK(std::abs(v) < 50.0);
    }
}

TEST_CASE("five-point derivative") {
    const double fs = 500.0;

    SUBCASE("constant input is zero after startup") {
        const std::vector<double> y = pt_derivative(std::vector<double>(100, 3.5), fs);
        CHECK(y.size() == 100);
        for (size_t i = 4; i < y.size(); ++i) {
            CHECK(y[i] == doctest::Approx(0.0).epsilon(1e-12));
        }
    }

    SUBCASE("ramp gives the analytic kernel value") {
        // For x[n] = a*n the kernel (fs/8)*(2x[n]+x[n-1]-x[n-3]-2x[n-4])
        // evaluates to (fs/8)*10*a once the startup has passed.
        const double slope = 0.002;  // mV per sample
        std::vector<double> x(50);
        for (size_t i = 0; i < x.size(); ++i) x[i] = slope * static_cast<double>(i);
        const std::vector<double> y = pt_derivative(x, fs);
        const double expected = fs / 8.0 * 10.0 * slope;
        for (size_t i = 4; i < y.size(); ++i) {
            CHECK(y[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    SUBCASE("linearity") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::vector<double> a(60), b(60), sum(60);
        for (size_t i = 0; i < a.size(); ++i) {
            a[i] = unit(rng);
            b[i] = unit(rng);
            sum[i] = a[i] + b[i];
        }
        const auto ya = pt_derivative(a, fs);
        const auto yb = pt_derivative(b, fs);
        const auto ys = pt_derivative(sum, fs);
        for (size_t i = 0; i < ys.size(); ++i) {
            CHECK(ys[i] == doctest::Approx(ya[i] + yb[i]).epsilon(1e-9));
        }
    }

    SUBCASE("too short input") {
        CHECK_THROWS_AS(pt_derivative(std::vector<double>{1, 2, 3, 4}, fs), ValidationError);
    }
}

TEST_CASE("rectify") {
    const std::vector<double> y = rectify(std::vector<double>{-3.0, 0.0, 2.0});
    CHECK(y == std::vector<double>{3.0, 0.0, 2.0});

    const std::vector<double> nonneg{0.5, 1.0, 0.0};
    CHECK(rectify(nonneg) == nonneg);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    std::vector<double> x(128);
    for (double& v : x) v = unit(rng);
    const auto once = rectify(x);
    CHECK(rectify(once) == once);
}

TEST_CASE("moving window integration") {
    const double fs = 500.0;

    SUBCASE("constant stays constant") {
        const std::vector<double> y = moving_window_integrate(std::vector<double>(300, 2.5), 150, fs);
        for (double v : y) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
    }

    SUBCASE("impulse smears into a 75-sample pulse of height 1/75") {
        // Direct convolution with a 75-long box kernel is the oracle.
        std::vector<double> x(500, 0.0);
        x[200] = 1.0;
        const std::vector<double> y = moving_window_integrate(x, 150, fs);

        std::vector<double> expected(x.size(), 0.0);
        for (size_t n = 0; n < x.size(); ++n) {
            double acc = 0.0;
            for (int k = 0; k < 75; ++k) {
                if (n >= static_cast<size_t>(k)) acc += x[n - k];
            }
            expected[n] = acc / 75.0;
        }
        for (size_t n = 100; n < x.size(); ++n) {
            CHECK(y[n] == doctest::Approx(expected[n]).epsilon(1e-12));
        }
        long nonzero = 0;
        for (size_t n = 0; n < y.size(); ++n) {
            if (y[n] > 0.0) {
                ++nonzero;
                CHECK(y[n] == doctest::Approx(1.0 / 75.0).epsilon(1e-12));
            }
        }
        CHECK(nonzero == 75);
    }

    SUBCASE("leading partial windows average what exists") {
        const std::vector<double> x{4.0, 0.0, 2.0};
        const std::vector<double> y = moving_window_integrate(x, 150, fs);
        CHECK(y[0] == doctest::Approx(4.0));
        CHECK(y[1] == doctest::Approx(2.0));
        CHECK(y[2] == doctest::Approx(2.0));
    }

    SUBCASE("nonpositive window is rejected") {
        CHECK_THROWS_AS(moving_window_integrate(std::vector<double>{1.0}, 0.0, fs),
                        ValidationError);
    }
}

TEST_CASE("R-peak detection on clean synthetic ECG") {
    synth::SynthEcgSpec spec;
    spec.duration_s = 30.0;
    spec.mean_hr_bpm = 60.0;
    spec.hrv_sin_amp_ms = 0.0;
    spec.noise_std_mv = 0.0;
    const synth::SynthEcg ecg = synth::synth_ecg(spec);

    const RPeakSeries detected = detect_r_peaks(ecg.record);
    CHECK(detected.peak_times_s.size() >= 29);
    CHECK(detected.peak_times_s.size() <= 31);

    // every detection within 20 ms of a ground-truth beat
    for (double t : detected.peak_times_s) {
        double best = 1e9;
        for (double g : ecg.ground_truth.peak_times_s) {
            best = std::min(best, std::abs(t - g));
        }
        CHECK(best <= 0.020);
    }
}

TEST_CASE("detection invariants: ordering, refractory, bounds, determinism") {
    synth::SynthEcgSpec spec;
    spec.duration_s = 40.0;
    spec.mean_hr_bpm = 95.0;
    spec.hrv_sin_amp_ms = 40.0;
    spec.noise_std_mv = 0.03;
    spec.seed = 42;
    const synth::SynthEcg ecg = synth::synth_ecg(spec);

    const RPeakSeries a = detect_r_peaks(ecg.record);
    const RPeakSeries b = detect_r_peaks(ecg.record);
    CHECK(a.peak_times_s == b.peak_times_s);  // bit-for-bit

    REQUIRE(!a.peak_times_s.empty());
    for (size_t i = 0; i + 1 < a.peak_times_s.size(); ++i) {
        CHECK(a.peak_times_s[i + 1] - a.peak_times_s[i] >= kRefractoryS);
    }
    CHECK(a.peak_times_s.front() >= 0.0);
    CHECK(a.peak_times_s.back() <= ecg.record.duration_s());
}

TEST_CASE("all-zero record yields no peaks") {
    const EcgRecord rec = make_record(std::vector<double>(5000, 0.0));
    const RPeakSeries peaks = detect_r_peaks(rec);
    CHECK(peaks.peak_times_s.empty());
}

TEST_CASE("refractory suppression of twin pulses 100 ms apart") {
    const double fs = 500.0;
    std::vector<double> x(static_cast<size_t>(4.0 * fs), 0.0);
    const auto add_pulse = [&](double center_s) {
        const double sigma = 0.010;
        for (size_t i = 0; i < x.size(); ++i) {
            const double dt = static_cast<double>(i) / fs - center_s;
            x[i] += std::exp(-dt * dt / (2.0 * sigma * sigma));
        }
    };
    add_pulse(2.0);
    add_pulse(2.1);
    const RPeakSeries peaks = detect_r_peaks(make_record(std::move(x)));
    CHECK(peaks.peak_times_s.size() == 1);
}

TEST_CASE("record too short for detection") {
    const EcgRecord rec = make_record(std::vector<double>(500, 0.0));  // 1 s
    CHECK_THROWS_AS(detect_r_peaks(rec), ValidationError);
}

TEST_CASE("window segmentation") {
    RPeakSeries peaks;
    peaks.peak_times_s = {0.5, 1.2, 15.0, 22.0, 29.5};

    SUBCASE("30 s gives 5 windows at the expected starts") {
        // floor((30 - 10) / 5) + 1 = 5
        const WindowingResult r = segment_windows(peaks, 30.0);
        REQUIRE(r.windows.size() == 5);
        CHECK_FALSE(r.duration_too_short);
        for (size_t i = 0; i < r.windows.size(); ++i) {
            CHECK(r.windows[i].start_s == doctest::Approx(5.0 * static_cast<double>(i)));
            CHECK(r.windows[i].length_s == 10.0);
        }
    }

    SUBCASE("exactly one window at 10 s") {
        const WindowingResult r = segment_windows(peaks, 10.0);
        CHECK(r.windows.size() == 1);
    }

    SUBCASE("a peak on a window boundary lands in both overlapping windows") {
        const WindowingResult r = segment_windows(peaks, 30.0);
        const Window& w2 = r.windows[2];  // [10, 20)
        const Window& w3 = r.windows[3];  // [15, 25)
        const auto contains = [](const Window& w, double t) {
            return std::find(w.peak_times_s.begin(), w.peak_times_s.end(), t) !=
                   w.peak_times_s.end();
        };
        CHECK(contains(w2, 15.0));
        CHECK(contains(w3, 15.0));
    }

    SUBCASE("short record flags instead of erroring") {
        const WindowingResult r = segment_windows(peaks, 8.0);
        CHECK(r.windows.empty());
        CHECK(r.duration_too_short);
    }

    SUBCASE("window peaks stay inside their half-open interval and sorted") {
        const WindowingResult r = segment_windows(peaks, 30.0);
        for (const Window& w : r.windows) {
            CHECK(std::is_sorted(w.peak_times_s.begin(), w.peak_times_s.end()));
            for (double t : w.peak_times_s) {
                CHECK(t >= w.start_s);
                CHECK(t < w.start_s + w.length_s);
            }
        }
    }
}

TEST_CASE("usable flag needs four peaks") {
    Window w;
    w.peak_times_s = {1.0, 2.0, 3.0};
    CHECK_FALSE(w.usable());
    w.peak_times_s.push_back(4.0);
    CHECK(w.usable());
}
