#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrvnet/hrv.hpp"
#include "hrvnet/nn.hpp"

namespace hrvnet::eval {

struct LabeledWindow {
    hrv::FeatureVector features;
    nn::MultitaskLabels labels;
};

struct SubjectData {
    int expert_label = 0;
    std::vector<LabeledWindow> windows;
};

struct SubjectDataset {
    std::map<std::string, SubjectData> subjects;

    size_t total_windows() const;
    // Throws ValidationError unless there are >= 2 subjects, every subject
    // has windows, and each window's expert label matches its subject.
    void validate() const;
};

struct LosoFold {
    std::vector<std::string> train_subjects;
    std::string test_subject;
};

// One fold per subject, in sorted subject order. Requires >= 2 subjects.
std::vector<LosoFold> loso_split(const SubjectDataset& dataset);

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

// Metrics from one confusion matrix. A metric whose denominator is zero is
// reported absent rather than silently zero.
struct Metrics {
    std::optional<double> accuracy, precision, recall, npv, f1;
};

Metrics metrics_from_counts(const ConfusionCounts& c);
ConfusionCounts count_confusion(std::span<const int> predictions, std::span<const int> labels);
Metrics confusion_metrics(std::span<const int> predictions, std::span<const int> labels);

struct ScatterPoint {
    double p_high_load = 0.0;
    double p_expert = 0.0;
    int true_expert = 0;
    int true_high_load = 0;
};

struct FoldResult {
    std::string test_subject;
    bool complete = false;
    std::string error;  // diagnostic when !complete
    ConfusionCounts expert_counts, load_counts;
    std::vector<nn::LossBreakdown> loss_curve;
    std::vector<ScatterPoint> points;
};

struct LosoReport {
    nn::NetworkConfig config;
    double decision_threshold = 0.5;
    std::vector<FoldResult> folds;
    ConfusionCounts pooled_expert, pooled_load;
    // Training losses averaged per epoch over completed folds:
    // {l_expertise, l_cognitive_load, l_total}.
    std::vector<std::array<double, 3>> mean_loss_curve;
    std::vector<ScatterPoint> scatter;
};

// Train one model per fold (fold seed = config.seed + fold index), classify
// the held-out subject's windows at the decision threshold, pool confusion
// counts and average the loss curves. Folds run in parallel up to
// max_threads; results are merged in fold order, so the report does not
// depend on scheduling. Failed folds are marked incomplete with diagnostics.
LosoReport run_loso(const SubjectDataset& dataset, const nn::NetworkConfig& config,
                    double decision_threshold = 0.5, int max_threads = 0);

inline constexpr int kScatterHistogramBins = 20;

struct ScatterSummary {
    // histogram[ix][iy] counts points with p_high_load in bin ix and
    // p_expert in bin iy, 20 x 20 over the unit square.
    std::array<std::array<int, kScatterHistogramBins>, kScatterHistogramBins> histogram{};
    // 2-means centroids of the (p_high_load, p_expert) cloud.
    std::array<std::array<double, 2>, 2> centroids{};
    long total_points = 0;
};

// Deterministic 2-means (farthest-point seeding, Lloyd iterations; an empty
// cluster recenters on the overall mean). Requires a non-empty scatter.
ScatterSummary probability_scatter_summary(const LosoReport& report);

// Lossless JSON round trip for reports.
std::string report_to_json(const LosoReport& report);
LosoReport report_from_json(const std::string& text);

// Plot series: loss_curves.csv (epoch,l_expertise,l_cog,l_total) and
// scatter.csv (p_high_load,p_expert,true_expert,true_highload).
std::string loss_curves_csv(const LosoReport& report);
std::string scatter_csv(const LosoReport& report);

}  // namespace hrvnet::eval
