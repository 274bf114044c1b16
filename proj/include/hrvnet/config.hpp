#pragma once

#include <filesystem>
#include <string>

#include "hrvnet/hrv.hpp"
#include "hrvnet/nn.hpp"
#include "hrvnet/synth.hpp"

namespace hrvnet::cli {

struct FilterSettings {
    double low_hz = 5.0;
    double high_hz = 15.0;
    int order = 4;
};

struct WindowSettings {
    double length_s = 10.0;
    double step_s = 5.0;
};

struct SynthSettings {
    std::string kind = "cohort";  // "ecg" | "cohort"
    synth::SynthEcgSpec ecg;
    double baseline_duration_s = 120.0;
    int n_events = 5;
    bool expert = false;
    synth::SynthCohortSpec cohort;
};

struct RunConfig {
    std::uint64_t seed = 7;
    nn::NetworkConfig network;
    FilterSettings filter;
    WindowSettings window;
    hrv::NormalizationMode normalization = hrv::NormalizationMode::ratio;
    int load_rating_threshold = 5;  // rating >= threshold means high load
    double decision_threshold = 0.5;
    int channel_index = 0;
    std::string output_dir = "run";
    SynthSettings synth;

    void validate() const;
};

// Strict JSON load: every field validated, unknown keys rejected with their
// path. The network seed and synth seeds default to the run seed unless set
// explicitly.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const std::string& text);

// Effective config with all defaults materialized; echoed into reports.
std::string run_config_to_json(const RunConfig& config);

}  // namespace hrvnet::cli
