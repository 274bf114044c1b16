#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "hrvnet/config.hpp"
#include "hrvnet/errors.hpp"
#include "hrvnet/eval.hpp"
#include "hrvnet/io.hpp"
#include "hrvnet/pipeline.hpp"
#include "hrvnet/synth.hpp"

namespace fs = std::filesystem;
using namespace hrvnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
    std::string config_path;
    std::string output_dir;  // overrides config when set
    std::uint64_t seed = 0;
    bool seed_set = false;
};

cli::RunConfig resolve_config(const CommonArgs& args) {
    cli::RunConfig config = cli::load_run_config(args.config_path);
    if (!args.output_dir.empty()) {
        config.output_dir = args.output_dir;
    }
    if (args.seed_set) {
        config.seed = args.seed;
        config.network.seed = args.seed;
        config.synth.ecg.seed = args.seed;
        config.synth.cohort.seed = args.seed;
    }
    return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "Run configuration JSON")->required();
    cmd->add_option("-o,--out", args.output_dir, "Output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "Override the run seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

std::string metric_str(const std::optional<double>& m) {
    if (!m) return "undef";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *m);
    return buf;
}

void print_head_metrics(const char* name, const eval::ConfusionCounts& counts) {
    const eval::Metrics m = eval::metrics_from_counts(counts);
    std::printf("  %-9s acc %s  prec %s  rec %s  npv %s  f1 %s  (tp %ld fp %ld fn %ld tn %ld)\n",
                name, metric_str(m.accuracy).c_str(), metric_str(m.precision).c_str(),
                metric_str(m.recall).c_str(), metric_str(m.npv).c_str(),
                metric_str(m.f1).c_str(), counts.tp, counts.fp, counts.fn, counts.tn);
}

int cmd_synth(const CommonArgs& args) {
    const cli::RunConfig config = resolve_config(args);
    const fs::path out_dir = config.output_dir;

    if (config.synth.kind == "cohort") {
        const eval::SubjectDataset dataset = synth::synth_cohort(config.synth.cohort);
        std::vector<io::FeatureRow> rows;
        std::map<std::string, int> roster;
        for (const auto& [id, data] : dataset.subjects) {
            roster[id] = data.expert_label;
            for (const eval::LabeledWindow& w : data.windows) {
                rows.push_back(io::FeatureRow{w.features, w.labels.expert, w.labels.high_load});
            }
        }
        io::write_features_csv(out_dir / "features.csv", rows);
        io::write_roster_csv(out_dir / "roster.csv", roster);
        io::atomic_write_file(out_dir / "config.json", cli::run_config_to_json(config));
        std::printf("wrote %zu feature rows for %zu subjects to %s\n", rows.size(),
                    dataset.subjects.size(), (out_dir / "features.csv").c_str());
        return kExitOk;
    }

    // kind == "ecg": one subject, baseline + simulation records with exact
    // ground truth and synthesized self-report events.
    synth::SynthEcgSpec baseline_spec = config.synth.ecg;
    baseline_spec.duration_s = config.synth.baseline_duration_s;
    baseline_spec.segment_kind = signal::SegmentKind::baseline;
    baseline_spec.seed = config.synth.ecg.seed + 1;
    const synth::SynthEcg baseline = synth::synth_ecg(baseline_spec);

    synth::SynthEcgSpec sim_spec = config.synth.ecg;
    sim_spec.segment_kind = signal::SegmentKind::simulation;
    const synth::SynthEcg simulation = synth::synth_ecg(sim_spec);

    const std::string& id = config.synth.ecg.subject_id;
    io::write_ecg_csv(out_dir / (id + "_baseline.csv"), baseline.record);
    io::write_ecg_csv(out_dir / (id + "_simulation.csv"), simulation.record);
    io::write_peaks_csv(out_dir / (id + "_truth_peaks.csv"), simulation.ground_truth);

    std::vector<io::CognitiveLoadAnnotation> annotations;
    std::mt19937_64 rng(config.synth.ecg.seed ^ 0xa11057a7e5ULL);
    const synth::RatingDistribution ratings = config.synth.expert
                                                  ? synth::RatingDistribution::low_load()
                                                  : synth::RatingDistribution::high_load();
    std::discrete_distribution<int> rating_dist(ratings.weights.begin(), ratings.weights.end());
    const int n_events = std::max(1, config.synth.n_events);
    for (int k = 0; k < n_events; ++k) {
        io::CognitiveLoadAnnotation a;
        a.subject_id = id;
        a.event_time_s = sim_spec.duration_s * static_cast<double>(k + 1) /
                         static_cast<double>(n_events + 1);
        a.rating = rating_dist(rng) + 1;
        annotations.push_back(std::move(a));
    }
    io::write_annotations_csv(out_dir / "annotations.csv", annotations);
    io::write_roster_csv(out_dir / "roster.csv", {{id, config.synth.expert ? 1 : 0}});
    io::atomic_write_file(out_dir / "config.json", cli::run_config_to_json(config));
    std::printf("wrote baseline (%zu samples), simulation (%zu samples), %zu truth peaks to %s\n",
                baseline.record.samples.size(), simulation.record.samples.size(),
                simulation.ground_truth.peak_times_s.size(), out_dir.c_str());
    return kExitOk;
}

int cmd_detect(const CommonArgs& args, const std::string& input, const std::string& output) {
    const cli::RunConfig config = resolve_config(args);
    const signal::EcgRecord record = io::ingest_ecg_csv(input, config.channel_index);
    const signal::RPeakSeries peaks = signal::detect_r_peaks(
        record, config.filter.low_hz, config.filter.high_hz, config.filter.order);
    const fs::path out_path =
        output.empty() ? fs::path(config.output_dir) / "peaks.csv" : fs::path(output);
    io::write_peaks_csv(out_path, peaks);
    std::printf("detected %zu R-peaks in %.1f s of ECG (%s); wrote %s\n",
                peaks.peak_times_s.size(), record.duration_s(), input.c_str(),
                out_path.c_str());
    return kExitOk;
}

int cmd_features(const CommonArgs& args, const std::string& baseline_path,
                 const std::string& simulation_path, const std::string& annotations_path,
                 const std::string& roster_path) {
    const cli::RunConfig config = resolve_config(args);

    signal::EcgRecord baseline = io::ingest_ecg_csv(baseline_path, config.channel_index);
    baseline.segment_kind = signal::SegmentKind::baseline;
    signal::EcgRecord simulation = io::ingest_ecg_csv(simulation_path, config.channel_index);
    simulation.segment_kind = signal::SegmentKind::simulation;
    simulation.subject_id = baseline.subject_id = simulation.subject_id.empty()
                                                      ? baseline.subject_id
                                                      : simulation.subject_id;

    const std::map<std::string, int> roster = io::read_roster_csv(roster_path);
    std::vector<io::CognitiveLoadAnnotation> annotations =
        io::read_annotations_csv(annotations_path);
    // Single-subject ingestion: the roster must name exactly one subject and
    // the records adopt its id.
    if (roster.size() != 1) {
        throw ValidationError("features: roster must contain exactly one subject for this command");
    }
    const std::string subject_id = roster.begin()->first;
    baseline.subject_id = subject_id;
    simulation.subject_id = subject_id;
    std::erase_if(annotations, [&](const io::CognitiveLoadAnnotation& a) {
        return a.subject_id != subject_id;
    });

    const cli::SubjectFeatures features = cli::extract_subject_features(
        baseline, simulation, annotations, roster.begin()->second, config);

    const fs::path out_path = fs::path(config.output_dir) / "features.csv";
    io::write_features_csv(out_path, features.rows);
    std::printf("wrote %zu feature rows (%zu windows skipped) to %s\n", features.rows.size(),
                features.skipped.size(), out_path.c_str());
    for (const cli::WindowSkip& skip : features.skipped) {
        std::fprintf(stderr, "  skipped window at %.1f s: %s\n", skip.start_s,
                     skip.reason.c_str());
    }
    return kExitOk;
}

nn::Dataset dataset_to_matrix(const eval::SubjectDataset& dataset) {
    nn::Dataset out;
    out.x = nn::Matrix(static_cast<int>(dataset.total_windows()), hrv::kFeatureCount);
    int r = 0;
    for (const auto& [id, data] : dataset.subjects) {
        for (const eval::LabeledWindow& w : data.windows) {
            std::copy(w.features.values.begin(), w.features.values.end(), out.x.row(r));
            out.y.push_back(w.labels);
            ++r;
        }
    }
    return out;
}

int cmd_train(const CommonArgs& args, const std::string& features_path) {
    const cli::RunConfig config = resolve_config(args);
    const std::vector<io::FeatureRow> rows = io::read_features_csv(features_path);
    const eval::SubjectDataset dataset = io::dataset_from_rows(rows);
    if (dataset.subjects.empty()) {
        throw ValidationError("train: no simulation windows in " + features_path);
    }

    const nn::Dataset train_set = dataset_to_matrix(dataset);
    const nn::TrainResult result = nn::train(train_set, config.network);

    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir);
    nn::save_checkpoint(out_dir / "model.json", result.params, config.network);

    std::string curve = "epoch,l_expertise,l_cog,l_total\n";
    for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
        const nn::LossBreakdown& b = result.epoch_losses[e];
        curve += std::to_string(e + 1) + "," + std::to_string(b.l_expertise) + "," +
                 std::to_string(b.l_cognitive_load) + "," + std::to_string(b.l_total) + "\n";
    }
    io::atomic_write_file(out_dir / "loss_curves.csv", curve);
    io::atomic_write_file(out_dir / "config.json", cli::run_config_to_json(config));
    std::printf("trained on %d rows for %d epochs; final l_total %.6f; wrote %s\n",
                train_set.x.rows, config.network.epochs, result.epoch_losses.back().l_total,
                (out_dir / "model.json").c_str());
    return kExitOk;
}

int cmd_loso(const CommonArgs& args, const std::string& features_path, bool synthetic) {
    const cli::RunConfig config = resolve_config(args);

    eval::SubjectDataset dataset;
    if (synthetic) {
        dataset = synth::synth_cohort(config.synth.cohort);
    } else {
        if (features_path.empty()) {
            throw ValidationError("loso: provide --features or --synthetic");
        }
        dataset = io::dataset_from_rows(io::read_features_csv(features_path));
    }

    const eval::LosoReport report =
        eval::run_loso(dataset, config.network, config.decision_threshold);

    const fs::path out_dir = config.output_dir;
    io::atomic_write_file(out_dir / "report.json", eval::report_to_json(report));
    io::atomic_write_file(out_dir / "loss_curves.csv", eval::loss_curves_csv(report));
    io::atomic_write_file(out_dir / "scatter.csv", eval::scatter_csv(report));
    io::atomic_write_file(out_dir / "config.json", cli::run_config_to_json(config));

    std::printf("LOSO over %zu subjects (%zu windows), %d epochs/fold\n",
                dataset.subjects.size(), dataset.total_windows(), config.network.epochs);
    std::printf("pooled:\n");
    print_head_metrics("expertise", report.pooled_expert);
    print_head_metrics("cog. load", report.pooled_load);
    for (const eval::FoldResult& fold : report.folds) {
        if (!fold.complete) {
            std::fprintf(stderr, "fold %s incomplete: %s\n", fold.test_subject.c_str(),
                         fold.error.c_str());
        }
    }
    std::printf("wrote report.json, loss_curves.csv, scatter.csv to %s\n", out_dir.c_str());
    return kExitOk;
}

int cmd_report(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) {
        throw ValidationError("report: cannot open " + report_path);
    }
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    const eval::LosoReport report = eval::report_from_json(text);

    std::printf("LOSO report: %zu folds, decision threshold %.2f\n", report.folds.size(),
                report.decision_threshold);
    for (const eval::FoldResult& fold : report.folds) {
        std::printf("fold %s%s\n", fold.test_subject.c_str(),
                    fold.complete ? "" : "  [INCOMPLETE]");
        if (fold.complete) {
            print_head_metrics("expertise", fold.expert_counts);
            print_head_metrics("cog. load", fold.load_counts);
        } else {
            std::printf("  error: %s\n", fold.error.c_str());
        }
    }
    std::printf("pooled:\n");
    print_head_metrics("expertise", report.pooled_expert);
    print_head_metrics("cog. load", report.pooled_load);

    if (!report.scatter.empty()) {
        const eval::ScatterSummary summary = eval::probability_scatter_summary(report);
        std::printf("scatter centroids (p_high_load, p_expert): (%.3f, %.3f) and (%.3f, %.3f)\n",
                    summary.centroids[0][0], summary.centroids[0][1], summary.centroids[1][0],
                    summary.centroids[1][1]);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECG-based expertise and cognitive-load classification pipeline"};
    app.require_subcommand(1);

    CommonArgs synth_args, detect_args, features_args, train_args, loso_args;
    std::string detect_input, detect_output;
    std::string feat_baseline, feat_simulation, feat_annotations, feat_roster;
    std::string train_features, loso_features, report_path;
    bool loso_synthetic = false;

    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate synthetic ECG or cohort data");
    add_common(synth_cmd, synth_args);

    CLI::App* detect_cmd = app.add_subcommand("detect", "Detect R-peaks in an ECG CSV");
    add_common(detect_cmd, detect_args);
    detect_cmd->add_option("-i,--input", detect_input, "ECG CSV (time_s,mv)")->required();
    detect_cmd->add_option("--output", detect_output, "Peaks CSV path");

    CLI::App* features_cmd =
        app.add_subcommand("features", "Extract normalized HRV features for one subject");
    add_common(features_cmd, features_args);
    features_cmd->add_option("--baseline", feat_baseline, "Baseline ECG CSV")->required();
    features_cmd->add_option("--simulation", feat_simulation, "Simulation ECG CSV")->required();
    features_cmd->add_option("--annotations", feat_annotations, "Annotations CSV")->required();
    features_cmd->add_option("--roster", feat_roster, "Roster CSV")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "Train the multitask network");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--features", train_features, "Features CSV")->required();

    CLI::App* loso_cmd = app.add_subcommand("loso", "Leave-one-subject-out evaluation");
    add_common(loso_cmd, loso_args);
    loso_cmd->add_option("--features", loso_features, "Features CSV");
    loso_cmd->add_flag("--synthetic", loso_synthetic, "Evaluate on the configured synthetic cohort");

    CLI::App* report_cmd = app.add_subcommand("report", "Summarize a LOSO report");
    report_cmd->add_option("--report", report_path, "Report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        // A missing config file is a usage problem, not a validation failure.
        const CommonArgs* used = nullptr;
        if (synth_cmd->parsed()) used = &synth_args;
        else if (detect_cmd->parsed()) used = &detect_args;
        else if (features_cmd->parsed()) used = &features_args;
        else if (train_cmd->parsed()) used = &train_args;
        else if (loso_cmd->parsed()) used = &loso_args;
        if (used && !fs::exists(used->config_path)) {
            std::cerr << "error: config file not found: " << used->config_path << "\n\n"
                      << app.help() << std::endl;
            return kExitUsage;
        }

        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (detect_cmd->parsed()) return cmd_detect(detect_args, detect_input, detect_output);
        if (features_cmd->parsed()) {
            return cmd_features(features_args, feat_baseline, feat_simulation, feat_annotations,
                                feat_roster);
        }
        if (train_cmd->parsed()) return cmd_train(train_args, train_features);
        if (loso_cmd->parsed()) return cmd_loso(loso_args, loso_features, loso_synthetic);
        if (report_cmd->parsed()) return cmd_report(report_path);
        std::cerr << app.help() << std::endl;
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << std::endl;
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << std::endl;
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitNumerical;
    }
}
