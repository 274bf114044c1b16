#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "hrvnet/eval.hpp"
#include "hrvnet/signal.hpp"

namespace hrvnet::synth {

// Template-bump ECG model: P/QRS/T Gaussian bumps at beat times whose RR
// sequence is 60000/mean_hr + hrv_sin_amp * sin(2*pi*hrv_sin_freq * t) ms,
// plus seeded white noise. Chosen for exact analytic ground truth rather
// than morphological realism.
struct SynthEcgSpec {
    std::string subject_id = "synth";
    double duration_s = 30.0;
    double mean_hr_bpm = 60.0;
    double hrv_sin_freq_hz = 0.1;
    double hrv_sin_amp_ms = 0.0;
    double noise_std_mv = 0.0;
    double sampling_rate_hz = 500.0;
    signal::SegmentKind segment_kind = signal::SegmentKind::simulation;
    std::uint64_t seed = 1;

    void validate() const;  // duration > 0, 30 <= hr <= 220, noise >= 0
};

struct SynthEcg {
    signal::EcgRecord record;
    signal::RPeakSeries ground_truth;  // exact R bump centers
};

SynthEcg synth_ecg(const SynthEcgSpec& spec);

// Probability weights over the 1..9 self-report scale.
struct RatingDistribution {
    std::array<double, 9> weights{};

    static RatingDistribution uniform();
    // Mass concentrated on low (1..3) or high (7..9) ratings.
    static RatingDistribution low_load();
    static RatingDistribution high_load();
    void validate() const;
};

// Labeled synthetic cohort at the feature level. Each subject gets a
// baseline feature vector; per-window simulation vectors are the baseline
// scaled by class-conditional factors, then normalized against the baseline
// (ratio mode), so expert/novice and high/low-load classes separate in
// normalized feature space by `separation` (0 = indistinguishable classes).
// Experts are shifted toward lower normalized HR and higher HF.
struct SynthCohortSpec {
    int n_experts = 5;
    int n_novices = 4;
    int windows_per_subject = 100;
    RatingDistribution expert_ratings = RatingDistribution::low_load();
    RatingDistribution novice_ratings = RatingDistribution::high_load();
    double separation = 1.0;
    int load_rating_threshold = 5;  // rating >= threshold means high load
    std::uint64_t seed = 7;

    void validate() const;
};

eval::SubjectDataset synth_cohort(const SynthCohortSpec& spec);

}  // namespace hrvnet::synth
