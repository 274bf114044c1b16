#include "hrvnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hrvnet/errors.hpp"

namespace hrvnet::synth {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct Bump {
    double amplitude_mv;
    double center_offset_s;  // relative to the R peak
    double sigma_s;
};

// P, Q, R, S, T as Gaussian bumps around each beat time.
constexpr Bump kWaveTemplate[] = {
    {0.12, -0.18, 0.030},   // P
    {-0.10, -0.026, 0.010}, // Q
    {1.10, 0.0, 0.010},     // R
    {-0.16, 0.026, 0.010},  // S
    {0.30, 0.22, 0.050},    // T
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

void SynthEcgSpec::validate() const {
    if (!(duration_s > 0.0)) throw ValidationError("synth_ecg: duration must be positive");
    if (!(mean_hr_bpm >= 30.0 && mean_hr_bpm <= 220.0)) {
        throw ValidationError("synth_ecg: mean heart rate must be in [30, 220] bpm");
    }
    if (noise_std_mv < 0.0) throw ValidationError("synth_ecg: noise std must be >= 0");
    if (!(sampling_rate_hz > 0.0)) throw ValidationError("synth_ecg: sampling rate must be positive");
    if (hrv_sin_amp_ms < 0.0) throw ValidationError("synth_ecg: HRV amplitude must be >= 0");
    if (hrv_sin_freq_hz < 0.0) throw ValidationError("synth_ecg: HRV frequency must be >= 0");
}

SynthEcg synth_ecg(const SynthEcgSpec& spec) {
    spec.validate();
    const double fs = spec.sampling_rate_hz;
    const long n = std::lround(spec.duration_s * fs);

    // Beat times: first beat away from the record edge, then the sinusoidally
    // modulated RR sequence evaluated at the current beat time.
    std::vector<double> beats;
    double t = 0.5;
    while (t < spec.duration_s - 0.35) {
        beats.push_back(t);
        double rr_ms = 60000.0 / spec.mean_hr_bpm +
                       spec.hrv_sin_amp_ms * std::sin(2.0 * kPi * spec.hrv_sin_freq_hz * t);
        rr_ms = std::max(rr_ms, 250.0);
        t += rr_ms / 1000.0;
    }

    SynthEcg out;
    out.record.subject_id = spec.subject_id;
    out.record.sampling_rate_hz = fs;
    out.record.segment_kind = spec.segment_kind;
    out.record.samples.assign(n, 0.0);

    for (double beat : beats) {
        for (const Bump& bump : kWaveTemplate) {
            const double center = beat + bump.center_offset_s;
            const long i0 = std::max<long>(0, std::lround((center - 5.0 * bump.sigma_s) * fs));
            const long i1 = std::min<long>(n - 1, std::lround((center + 5.0 * bump.sigma_s) * fs));
            for (long i = i0; i <= i1; ++i) {
                const double dt = static_cast<double>(i) / fs - center;
                out.record.samples[i] +=
                    bump.amplitude_mv * std::exp(-dt * dt / (2.0 * bump.sigma_s * bump.sigma_s));
            }
        }
    }

    if (spec.noise_std_mv > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> noise(0.0, spec.noise_std_mv);
        for (double& v : out.record.samples) {
            v += noise(rng);
        }
    }

    out.ground_truth.source_subject = spec.subject_id;
    out.ground_truth.peak_times_s = std::move(beats);
    return out;
}

RatingDistribution RatingDistribution::uniform() {
    RatingDistribution d;
    d.weights.fill(1.0 / 9.0);
    return d;
}

RatingDistribution RatingDistribution::low_load() {
    RatingDistribution d;
    d.weights = {0.35, 0.30, 0.20, 0.15, 0.0, 0.0, 0.0, 0.0, 0.0};
    return d;
}

RatingDistribution RatingDistribution::high_load() {
    RatingDistribution d;
    d.weights = {0.0, 0.0, 0.0, 0.0, 0.15, 0.20, 0.20, 0.25, 0.20};
    return d;
}

void RatingDistribution::validate() const {
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw ValidationError("rating distribution: weights must be finite and >= 0");
        }
        sum += w;
    }
    if (!(sum > 0.0)) throw ValidationError("rating distribution: weights must not all be zero");
}

void SynthCohortSpec::validate() const {
    if (n_experts < 1 || n_novices < 1) {
        throw ValidationError("synth_cohort: need at least one subject per class");
    }
    if (windows_per_subject < 1) {
        throw ValidationError("synth_cohort: windows_per_subject must be >= 1");
    }
    if (separation < 0.0 || !std::isfinite(separation)) {
        throw ValidationError("synth_cohort: separation must be finite and >= 0");
    }
    if (load_rating_threshold < 1 || load_rating_threshold > 9) {
        throw ValidationError("synth_cohort: load rating threshold must be in 1..9");
    }
    expert_ratings.validate();
    novice_ratings.validate();
}

namespace {

// Plausible resting-baseline magnitudes per canonical feature; they act as
// normalization denominators, so only their scale matters.
constexpr std::array<double, hrv::kFeatureCount> kBaselineTemplate = {
    700.0, 1000.0, 300.0, 850.0, 50.0, 0.059, 42.0, 30.0, 8.0, 27.0,
    70.6,  15.0,   300.0, 500.0, 400.0, 1215.0, 55.6, 44.4, 1.25, 1.9,
};

// Log-space class shifts per feature. Experts drift toward lower normalized
// HR and higher HF; high cognitive load pushes the opposite way plus lower
// short-term variability.
constexpr std::array<double, hrv::kFeatureCount> kExpertDirection = {
    0.10, 0.10, 0.15, 0.25, 0.20, 0.05, 0.30, 0.25, 0.20, 0.20,
    -0.30, 0.05, 0.10, 0.15, 0.40, 0.20, -0.15, 0.15, -0.35, -0.30,
};

constexpr std::array<double, hrv::kFeatureCount> kHighLoadDirection = {
    -0.10, -0.10, -0.15, -0.20, -0.25, -0.10, -0.30, -0.25, -0.20, -0.20,
    0.30,  -0.05, -0.10, 0.10,  -0.35, -0.15, 0.20,  -0.20, 0.35,  0.30,
};

constexpr double kWindowNoiseSigma = 0.12;

int sample_rating(const RatingDistribution& dist, std::mt19937_64& rng) {
    std::discrete_distribution<int> d(dist.weights.begin(), dist.weights.end());
    return d(rng) + 1;
}

}  // namespace

eval::SubjectDataset synth_cohort(const SynthCohortSpec& spec) {
    spec.validate();
    eval::SubjectDataset dataset;

    const int n_subjects = spec.n_experts + spec.n_novices;
    for (int s = 0; s < n_subjects; ++s) {
        const bool expert = s < spec.n_experts;
        const std::string subject_id =
            (expert ? "expert_" : "novice_") + std::to_string(expert ? s + 1 : s - spec.n_experts + 1);
        std::mt19937_64 rng(splitmix64(spec.seed + 0x51ecu * static_cast<std::uint64_t>(s + 1)));
        std::normal_distribution<double> jitter(0.0, 0.05);
        std::normal_distribution<double> window_noise(0.0, kWindowNoiseSigma);

        hrv::FeatureVector baseline;
        baseline.subject_id = subject_id;
        baseline.window_start_s = 0.0;
        baseline.segment_kind = signal::SegmentKind::baseline;
        for (int j = 0; j < hrv::kFeatureCount; ++j) {
            baseline.values[j] = kBaselineTemplate[j] * std::exp(jitter(rng));
        }

        eval::SubjectData data;
        data.expert_label = expert ? 1 : 0;
        const RatingDistribution& ratings = expert ? spec.expert_ratings : spec.novice_ratings;

        for (int w = 0; w < spec.windows_per_subject; ++w) {
            const int rating = sample_rating(ratings, rng);
            const int high_load = rating >= spec.load_rating_threshold ? 1 : 0;

            hrv::FeatureVector sim;
            sim.subject_id = subject_id;
            sim.window_start_s = 5.0 * static_cast<double>(w);
            sim.segment_kind = signal::SegmentKind::simulation;
            const double e_sign = expert ? 0.5 : -0.5;
            const double l_sign = high_load ? 0.5 : -0.5;
            for (int j = 0; j < hrv::kFeatureCount; ++j) {
                const double shift = spec.separation * (e_sign * kExpertDirection[j] +
                                                        l_sign * kHighLoadDirection[j]);
                sim.values[j] = baseline.values[j] * std::exp(shift + window_noise(rng));
            }

            eval::LabeledWindow window;
            window.features =
                hrv::normalize_features(sim, baseline, hrv::NormalizationMode::ratio);
            window.labels = nn::MultitaskLabels{data.expert_label, high_load};
            data.windows.push_back(std::move(window));
        }
        dataset.subjects.emplace(subject_id, std::move(data));
    }
    return dataset;
}

}  // namespace hrvnet::synth
