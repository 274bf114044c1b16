#include "hrvnet/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "hrvnet/errors.hpp"
#include "hrvnet/signal.hpp"

namespace hrvnet::cli {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
    if (!j.is_object()) {
        throw ValidationError("config: " + context + " must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw ValidationError("config: unknown key '" + context + key + "'");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& target) {
    if (const auto it = j.find(key); it != j.end()) {
        target = it->get<T>();
    }
}

void parse_network(const json& j, nn::NetworkConfig& c, bool& seed_given) {
    reject_unknown_keys(j,
                        {"input_dim", "hidden_sizes", "leaky_slope", "dropout_rate", "l2_coeff",
                         "learning_rate", "batch_size", "epochs", "seed"},
                        "network.");
    read_field(j, "input_dim", c.input_dim);
    read_field(j, "hidden_sizes", c.hidden_sizes);
    read_field(j, "leaky_slope", c.leaky_slope);
    read_field(j, "dropout_rate", c.dropout_rate);
    read_field(j, "l2_coeff", c.l2_coeff);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "epochs", c.epochs);
    if (j.contains("seed")) {
        c.seed = j.at("seed").get<std::uint64_t>();
        seed_given = true;
    }
}

void parse_ratings(const json& j, synth::RatingDistribution& d, const std::string& context) {
    if (!j.is_array() || j.size() != 9) {
        throw ValidationError("config: " + context + " must be an array of 9 weights");
    }
    for (size_t i = 0; i < 9; ++i) {
        d.weights[i] = j[i].get<double>();
    }
}

void parse_synth(const json& j, SynthSettings& s, bool& ecg_seed_given, bool& cohort_seed_given) {
    reject_unknown_keys(j, {"kind", "ecg", "baseline_duration_s", "n_events", "expert", "cohort"},
                        "synth.");
    read_field(j, "kind", s.kind);
    if (s.kind != "ecg" && s.kind != "cohort") {
        throw ValidationError("config: synth.kind must be 'ecg' or 'cohort'");
    }
    read_field(j, "baseline_duration_s", s.baseline_duration_s);
    read_field(j, "n_events", s.n_events);
    read_field(j, "expert", s.expert);
    if (const auto it = j.find("ecg"); it != j.end()) {
        reject_unknown_keys(*it,
                            {"subject_id", "duration_s", "mean_hr_bpm", "hrv_sin_freq_hz",
                             "hrv_sin_amp_ms", "noise_std_mv", "sampling_rate_hz", "seed"},
                            "synth.ecg.");
        read_field(*it, "subject_id", s.ecg.subject_id);
        read_field(*it, "duration_s", s.ecg.duration_s);
        read_field(*it, "mean_hr_bpm", s.ecg.mean_hr_bpm);
        read_field(*it, "hrv_sin_freq_hz", s.ecg.hrv_sin_freq_hz);
        read_field(*it, "hrv_sin_amp_ms", s.ecg.hrv_sin_amp_ms);
        read_field(*it, "noise_std_mv", s.ecg.noise_std_mv);
        read_field(*it, "sampling_rate_hz", s.ecg.sampling_rate_hz);
        if (it->contains("seed")) {
            s.ecg.seed = it->at("seed").get<std::uint64_t>();
            ecg_seed_given = true;
        }
    }
    if (const auto it = j.find("cohort"); it != j.end()) {
        reject_unknown_keys(*it,
                            {"n_experts", "n_novices", "windows_per_subject", "separation",
                             "expert_ratings", "novice_ratings", "seed"},
                            "synth.cohort.");
        read_field(*it, "n_experts", s.cohort.n_experts);
        read_field(*it, "n_novices", s.cohort.n_novices);
        read_field(*it, "windows_per_subject", s.cohort.windows_per_subject);
        read_field(*it, "separation", s.cohort.separation);
        if (it->contains("expert_ratings")) {
            parse_ratings(it->at("expert_ratings"), s.cohort.expert_ratings,
                          "synth.cohort.expert_ratings");
        }
        if (it->contains("novice_ratings")) {
            parse_ratings(it->at("novice_ratings"), s.cohort.novice_ratings,
                          "synth.cohort.novice_ratings");
        }
        if (it->contains("seed")) {
            s.cohort.seed = it->at("seed").get<std::uint64_t>();
            cohort_seed_given = true;
        }
    }
}

}  // namespace

void RunConfig::validate() const {
    network.validate();
    if (!(filter.low_hz > 0.0 && filter.low_hz < filter.high_hz)) {
        throw ValidationError("config: filter band must satisfy 0 < low < high");
    }
    if (filter.order < 2 || filter.order % 2 != 0) {
        throw ValidationError("config: filter order must be even and >= 2");
    }
    if (window.length_s != signal::kWindowLengthS || window.step_s != signal::kWindowStepS) {
        throw ValidationError("config: window settings are fixed by the windowing contract (10 s length, 5 s step)");
    }
    if (load_rating_threshold < 1 || load_rating_threshold > 9) {
        throw ValidationError("config: load rating threshold must be in 1..9");
    }
    if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
        throw ValidationError("config: decision threshold must be in (0, 1)");
    }
    if (channel_index < 0) {
        throw ValidationError("config: channel index must be >= 0");
    }
    if (output_dir.empty()) {
        throw ValidationError("config: output_dir must not be empty");
    }
    synth.ecg.validate();
    synth.cohort.validate();
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown_keys(j,
                        {"seed", "network", "filter", "window", "normalization",
                         "load_rating_threshold", "decision_threshold", "channel_index",
                         "output_dir", "synth"},
                        "");

    RunConfig config;
    bool network_seed_given = false, ecg_seed_given = false, cohort_seed_given = false;
    try {
        read_field(j, "seed", config.seed);
        if (const auto it = j.find("network"); it != j.end()) {
            parse_network(*it, config.network, network_seed_given);
        }
        if (const auto it = j.find("filter"); it != j.end()) {
            reject_unknown_keys(*it, {"low_hz", "high_hz", "order"}, "filter.");
            read_field(*it, "low_hz", config.filter.low_hz);
            read_field(*it, "high_hz", config.filter.high_hz);
            read_field(*it, "order", config.filter.order);
        }
        if (const auto it = j.find("window"); it != j.end()) {
            reject_unknown_keys(*it, {"length_s", "step_s"}, "window.");
            read_field(*it, "length_s", config.window.length_s);
            read_field(*it, "step_s", config.window.step_s);
        }
        if (const auto it = j.find("normalization"); it != j.end()) {
            const std::string mode = it->get<std::string>();
            if (mode == "ratio") {
                config.normalization = hrv::NormalizationMode::ratio;
            } else if (mode == "difference") {
                config.normalization = hrv::NormalizationMode::difference;
            } else {
                throw ValidationError("config: normalization must be 'ratio' or 'difference'");
            }
        }
        read_field(j, "load_rating_threshold", config.load_rating_threshold);
        read_field(j, "decision_threshold", config.decision_threshold);
        read_field(j, "channel_index", config.channel_index);
        read_field(j, "output_dir", config.output_dir);
        if (const auto it = j.find("synth"); it != j.end()) {
            parse_synth(*it, config.synth, ecg_seed_given, cohort_seed_given);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }

    // Unset component seeds follow the run seed.
    if (!network_seed_given) config.network.seed = config.seed;
    if (!ecg_seed_given) config.synth.ecg.seed = config.seed;
    if (!cohort_seed_given) config.synth.cohort.seed = config.seed;
    config.synth.cohort.load_rating_threshold = config.load_rating_threshold;

    config.validate();
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("config: cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

std::string run_config_to_json(const RunConfig& config) {
    json j;
    j["seed"] = config.seed;
    j["network"] = {{"input_dim", config.network.input_dim},
                    {"hidden_sizes", config.network.hidden_sizes},
                    {"leaky_slope", config.network.leaky_slope},
                    {"dropout_rate", config.network.dropout_rate},
                    {"l2_coeff", config.network.l2_coeff},
                    {"learning_rate", config.network.learning_rate},
                    {"batch_size", config.network.batch_size},
                    {"epochs", config.network.epochs},
                    {"seed", config.network.seed}};
    j["filter"] = {{"low_hz", config.filter.low_hz},
                   {"high_hz", config.filter.high_hz},
                   {"order", config.filter.order}};
    j["window"] = {{"length_s", config.window.length_s}, {"step_s", config.window.step_s}};
    j["normalization"] =
        config.normalization == hrv::NormalizationMode::ratio ? "ratio" : "difference";
    j["load_rating_threshold"] = config.load_rating_threshold;
    j["decision_threshold"] = config.decision_threshold;
    j["channel_index"] = config.channel_index;
    j["output_dir"] = config.output_dir;
    j["synth"] = {{"kind", config.synth.kind},
                  {"baseline_duration_s", config.synth.baseline_duration_s},
                  {"n_events", config.synth.n_events},
                  {"expert", config.synth.expert},
                  {"ecg",
                   {{"subject_id", config.synth.ecg.subject_id},
                    {"duration_s", config.synth.ecg.duration_s},
                    {"mean_hr_bpm", config.synth.ecg.mean_hr_bpm},
                    {"hrv_sin_freq_hz", config.synth.ecg.hrv_sin_freq_hz},
                    {"hrv_sin_amp_ms", config.synth.ecg.hrv_sin_amp_ms},
                    {"noise_std_mv", config.synth.ecg.noise_std_mv},
                    {"sampling_rate_hz", config.synth.ecg.sampling_rate_hz},
                    {"seed", config.synth.ecg.seed}}},
                  {"cohort",
                   {{"n_experts", config.synth.cohort.n_experts},
                    {"n_novices", config.synth.cohort.n_novices},
                    {"windows_per_subject", config.synth.cohort.windows_per_subject},
                    {"separation", config.synth.cohort.separation},
                    {"expert_ratings", config.synth.cohort.expert_ratings.weights},
                    {"novice_ratings", config.synth.cohort.novice_ratings.weights},
                    {"seed", config.synth.cohort.seed}}}};
    return j.dump(2) + "\n";
}

}  // namespace hrvnet::cli
