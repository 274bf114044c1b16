#include "hrvnet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "format.hpp"
#include "hrvnet/errors.hpp"

namespace hrvnet::eval {

size_t SubjectDataset::total_windows() const {
    size_t n = 0;
    for (const auto& [id, data] : subjects) {
        n += data.windows.size();
    }
    return n;
}

void SubjectDataset::validate() const {
    if (subjects.size() < 2) {
        throw ValidationError("dataset: leave-one-subject-out needs at least 2 subjects");
    }
    for (const auto& [id, data] : subjects) {
        if (data.windows.empty()) {
            throw ValidationError("dataset: subject " + id + " has no windows");
        }
        for (const LabeledWindow& w : data.windows) {
            if (w.labels.expert != data.expert_label) {
                throw ValidationError("dataset: inconsistent expert label inside subject " + id);
            }
            w.features.validate();
        }
    }
}

std::vector<LosoFold> loso_split(const SubjectDataset& dataset) {
    dataset.validate();
    std::vector<LosoFold> folds;
    for (const auto& [test_id, _] : dataset.subjects) {
        LosoFold fold;
        fold.test_subject = test_id;
        for (const auto& [train_id, __] : dataset.subjects) {
            if (train_id != test_id) {
                fold.train_subjects.push_back(train_id);
            }
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
    Metrics m;
    const auto ratio = [](long num, long den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.npv = ratio(c.tn, c.tn + c.fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    return m;
}

ConfusionCounts count_confusion(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw ValidationError("confusion_metrics: prediction/label length mismatch");
    }
    if (predictions.empty()) {
        throw ValidationError("confusion_metrics: empty input");
    }
    ConfusionCounts c;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] != 0;
        const bool y = labels[i] != 0;
        if (p && y) ++c.tp;
        else if (p && !y) ++c.fp;
        else if (!p && y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Metrics confusion_metrics(std::span<const int> predictions, std::span<const int> labels) {
    return metrics_from_counts(count_confusion(predictions, labels));
}

namespace {

// Derived report fields (pooled counts, averaged curves, concatenated
// scatter) recomputed from the folds so that serialization and
// deserialization agree bit for bit.
void finalize_report(LosoReport& report) {
    report.pooled_expert = ConfusionCounts{};
    report.pooled_load = ConfusionCounts{};
    report.scatter.clear();
    report.mean_loss_curve.clear();

    size_t n_epochs = 0;
    long n_complete = 0;
    for (const FoldResult& fold : report.folds) {
        if (!fold.complete) continue;
        ++n_complete;
        report.pooled_expert += fold.expert_counts;
        report.pooled_load += fold.load_counts;
        report.scatter.insert(report.scatter.end(), fold.points.begin(), fold.points.end());
        n_epochs = std::max(n_epochs, fold.loss_curve.size());
    }
    if (n_complete == 0 || n_epochs == 0) return;

    report.mean_loss_curve.assign(n_epochs, {0.0, 0.0, 0.0});
    for (const FoldResult& fold : report.folds) {
        if (!fold.complete) continue;
        for (size_t e = 0; e < fold.loss_curve.size(); ++e) {
            report.mean_loss_curve[e][0] += fold.loss_curve[e].l_expertise;
            report.mean_loss_curve[e][1] += fold.loss_curve[e].l_cognitive_load;
            report.mean_loss_curve[e][2] += fold.loss_curve[e].l_total;
        }
    }
    for (auto& row : report.mean_loss_curve) {
        for (double& v : row) {
            v /= static_cast<double>(n_complete);
        }
    }
}

FoldResult run_fold(const SubjectDataset& dataset, const LosoFold& fold,
                    const nn::NetworkConfig& fold_config, double threshold) {
    FoldResult result;
    result.test_subject = fold.test_subject;
    try {
        nn::Dataset train_set;
        size_t rows = 0;
        for (const std::string& id : fold.train_subjects) {
            rows += dataset.subjects.at(id).windows.size();
        }
        train_set.x = nn::Matrix(static_cast<int>(rows), hrv::kFeatureCount);
        train_set.y.reserve(rows);
        int r = 0;
        for (const std::string& id : fold.train_subjects) {
            for (const LabeledWindow& w : dataset.subjects.at(id).windows) {
                std::copy(w.features.values.begin(), w.features.values.end(), train_set.x.row(r));
                train_set.y.push_back(w.labels);
                ++r;
            }
        }

        const nn::TrainResult trained = nn::train(train_set, fold_config);
        result.loss_curve = trained.epoch_losses;

        std::vector<int> pred_expert, pred_load, true_expert, true_load;
        for (const LabeledWindow& w : dataset.subjects.at(fold.test_subject).windows) {
            const nn::HeadProbabilities p =
                nn::predict(trained.params, fold_config, w.features.values);
            pred_expert.push_back(p.p_expert >= threshold ? 1 : 0);
            pred_load.push_back(p.p_high_load >= threshold ? 1 : 0);
            true_expert.push_back(w.labels.expert);
            true_load.push_back(w.labels.high_load);
            result.points.push_back(
                ScatterPoint{p.p_high_load, p.p_expert, w.labels.expert, w.labels.high_load});
        }
        result.expert_counts = count_confusion(pred_expert, true_expert);
        result.load_counts = count_confusion(pred_load, true_load);
        result.complete = true;
    } catch (const std::exception& e) {
        result.complete = false;
        result.error = e.what();
    }
    return result;
}

}  // namespace

LosoReport run_loso(const SubjectDataset& dataset, const nn::NetworkConfig& config,
                    double decision_threshold, int max_threads) {
    dataset.validate();
    config.validate();
    if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
        throw ValidationError("run_loso: decision threshold must be in (0, 1)");
    }

    const std::vector<LosoFold> folds = loso_split(dataset);

    LosoReport report;
    report.config = config;
    report.decision_threshold = decision_threshold;
    report.folds.resize(folds.size());

    int n_threads = max_threads > 0 ? max_threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::clamp(n_threads, 1, static_cast<int>(folds.size()));

    std::atomic<size_t> next{0};
    const auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= folds.size()) break;
            nn::NetworkConfig fold_config = config;
            fold_config.seed = config.seed + static_cast<std::uint64_t>(i);
            report.folds[i] = run_fold(dataset, folds[i], fold_config, decision_threshold);
        }
    };

    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    finalize_report(report);
    return report;
}

ScatterSummary probability_scatter_summary(const LosoReport& report) {
    const std::vector<ScatterPoint>& pts = report.scatter;
    if (pts.empty()) {
        throw ValidationError("scatter summary: no scatter points in report");
    }

    ScatterSummary s;
    s.total_points = static_cast<long>(pts.size());
    for (const ScatterPoint& p : pts) {
        const int ix = std::min(kScatterHistogramBins - 1,
                                std::max(0, static_cast<int>(p.p_high_load * kScatterHistogramBins)));
        const int iy = std::min(kScatterHistogramBins - 1,
                                std::max(0, static_cast<int>(p.p_expert * kScatterHistogramBins)));
        s.histogram[ix][iy] += 1;
    }

    // Deterministic 2-means: seed with the point farthest from the overall
    // mean, then the point farthest from the first seed.
    const auto dist2 = [](double ax, double ay, double bx, double by) {
        return (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
    };
    double mx = 0.0, my = 0.0;
    for (const ScatterPoint& p : pts) {
        mx += p.p_high_load;
        my += p.p_expert;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());

    size_t i0 = 0;
    for (size_t i = 1; i < pts.size(); ++i) {
        if (dist2(pts[i].p_high_load, pts[i].p_expert, mx, my) >
            dist2(pts[i0].p_high_load, pts[i0].p_expert, mx, my)) {
            i0 = i;
        }
    }
    size_t i1 = 0;
    for (size_t i = 1; i < pts.size(); ++i) {
        if (dist2(pts[i].p_high_load, pts[i].p_expert, pts[i0].p_high_load, pts[i0].p_expert) >
            dist2(pts[i1].p_high_load, pts[i1].p_expert, pts[i0].p_high_load, pts[i0].p_expert)) {
            i1 = i;
        }
    }

    std::array<std::array<double, 2>, 2> c = {{{pts[i0].p_high_load, pts[i0].p_expert},
                                               {pts[i1].p_high_load, pts[i1].p_expert}}};
    for (int iter = 0; iter < 100; ++iter) {
        std::array<std::array<double, 2>, 2> sum = {{{0.0, 0.0}, {0.0, 0.0}}};
        std::array<long, 2> count = {0, 0};
        for (const ScatterPoint& p : pts) {
            const int k = dist2(p.p_high_load, p.p_expert, c[0][0], c[0][1]) <=
                                  dist2(p.p_high_load, p.p_expert, c[1][0], c[1][1])
                              ? 0
                              : 1;
            sum[k][0] += p.p_high_load;
            sum[k][1] += p.p_expert;
            count[k] += 1;
        }
        std::array<std::array<double, 2>, 2> next;
        for (int k = 0; k < 2; ++k) {
            if (count[k] > 0) {
                next[k] = {sum[k][0] / count[k], sum[k][1] / count[k]};
            } else {
                next[k] = {mx, my};
            }
        }
        if (next == c) break;
        c = next;
    }
    s.centroids = c;
    return s;
}

namespace {

nlohmann::json counts_to_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

ConfusionCounts counts_from_json(const nlohmann::json& j) {
    return ConfusionCounts{j.at("tp").get<long>(), j.at("fp").get<long>(),
                           j.at("fn").get<long>(), j.at("tn").get<long>()};
}

nlohmann::json metrics_to_json(const Metrics& m) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    return {{"accuracy", opt(m.accuracy)},
            {"precision", opt(m.precision)},
            {"recall", opt(m.recall)},
            {"npv", opt(m.npv)},
            {"f1", opt(m.f1)}};
}

nlohmann::json config_to_json(const nn::NetworkConfig& c) {
    return {{"input_dim", c.input_dim},
            {"hidden_sizes", c.hidden_sizes},
            {"leaky_slope", c.leaky_slope},
            {"dropout_rate", c.dropout_rate},
            {"l2_coeff", c.l2_coeff},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed}};
}

nn::NetworkConfig config_from_json(const nlohmann::json& j) {
    nn::NetworkConfig c;
    c.input_dim = j.at("input_dim").get<int>();
    c.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.l2_coeff = j.at("l2_coeff").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string report_to_json(const LosoReport& report) {
    nlohmann::json j;
    j["config"] = config_to_json(report.config);
    j["decision_threshold"] = report.decision_threshold;

    nlohmann::json folds = nlohmann::json::array();
    Metrics mean_expert, mean_load;
    for (const FoldResult& fold : report.folds) {
        nlohmann::json f;
        f["test_subject"] = fold.test_subject;
        f["complete"] = fold.complete;
        f["error"] = fold.error;
        f["expert"] = counts_to_json(fold.expert_counts);
        f["expert"]["metrics"] = metrics_to_json(metrics_from_counts(fold.expert_counts));
        f["load"] = counts_to_json(fold.load_counts);
        f["load"]["metrics"] = metrics_to_json(metrics_from_counts(fold.load_counts));
        nlohmann::json curve;
        std::vector<double> le, lc, l2, lt;
        for (const nn::LossBreakdown& b : fold.loss_curve) {
            le.push_back(b.l_expertise);
            lc.push_back(b.l_cognitive_load);
            l2.push_back(b.l2_penalty);
            lt.push_back(b.l_total);
        }
        curve["l_expertise"] = le;
        curve["l_cognitive_load"] = lc;
        curve["l2_penalty"] = l2;
        curve["l_total"] = lt;
        f["loss_curve"] = std::move(curve);
        nlohmann::json points = nlohmann::json::array();
        for (const ScatterPoint& p : fold.points) {
            points.push_back({p.p_high_load, p.p_expert, p.true_expert, p.true_high_load});
        }
        f["points"] = std::move(points);
        folds.push_back(std::move(f));
    }
    j["folds"] = std::move(folds);

    j["pooled"] = {{"expert", counts_to_json(report.pooled_expert)},
                   {"load", counts_to_json(report.pooled_load)}};
    j["pooled"]["expert"]["metrics"] = metrics_to_json(metrics_from_counts(report.pooled_expert));
    j["pooled"]["load"]["metrics"] = metrics_to_json(metrics_from_counts(report.pooled_load));

    // Per-fold metric means (over folds where the metric is defined), the
    // macro-averaged companion to the pooled numbers.
    const auto fold_mean = [&](bool expert_head) {
        nlohmann::json out;
        const char* names[] = {"accuracy", "precision", "recall", "npv", "f1"};
        for (int metric = 0; metric < 5; ++metric) {
            double sum = 0.0;
            long count = 0;
            for (const FoldResult& fold : report.folds) {
                if (!fold.complete) continue;
                const Metrics m =
                    metrics_from_counts(expert_head ? fold.expert_counts : fold.load_counts);
                const std::optional<double>* v[] = {&m.accuracy, &m.precision, &m.recall, &m.npv,
                                                    &m.f1};
                if (v[metric]->has_value()) {
                    sum += v[metric]->value();
                    ++count;
                }
            }
            out[names[metric]] =
                count > 0 ? nlohmann::json(sum / static_cast<double>(count)) : nlohmann::json(nullptr);
            out[std::string(names[metric]) + "_defined_folds"] = count;
        }
        return out;
    };
    j["fold_mean"] = {{"expert", fold_mean(true)}, {"load", fold_mean(false)}};

    nlohmann::json curve;
    std::vector<double> le, lc, lt;
    for (const auto& row : report.mean_loss_curve) {
        le.push_back(row[0]);
        lc.push_back(row[1]);
        lt.push_back(row[2]);
    }
    curve["l_expertise"] = le;
    curve["l_cognitive_load"] = lc;
    curve["l_total"] = lt;
    j["mean_loss_curve"] = std::move(curve);

    nlohmann::json scatter = nlohmann::json::array();
    for (const ScatterPoint& p : report.scatter) {
        scatter.push_back({p.p_high_load, p.p_expert, p.true_expert, p.true_high_load});
    }
    j["scatter"] = std::move(scatter);

    return j.dump(2) + "\n";
}

LosoReport report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report: invalid JSON: ") + e.what());
    }

    LosoReport report;
    report.config = config_from_json(j.at("config"));
    report.decision_threshold = j.at("decision_threshold").get<double>();
    for (const nlohmann::json& f : j.at("folds")) {
        FoldResult fold;
        fold.test_subject = f.at("test_subject").get<std::string>();
        fold.complete = f.at("complete").get<bool>();
        fold.error = f.at("error").get<std::string>();
        fold.expert_counts = counts_from_json(f.at("expert"));
        fold.load_counts = counts_from_json(f.at("load"));
        const nlohmann::json& curve = f.at("loss_curve");
        const auto le = curve.at("l_expertise").get<std::vector<double>>();
        const auto lc = curve.at("l_cognitive_load").get<std::vector<double>>();
        const auto l2 = curve.at("l2_penalty").get<std::vector<double>>();
        const auto lt = curve.at("l_total").get<std::vector<double>>();
        if (le.size() != lc.size() || le.size() != l2.size() || le.size() != lt.size()) {
            throw ValidationError("report: ragged loss curve arrays");
        }
        for (size_t e = 0; e < le.size(); ++e) {
            fold.loss_curve.push_back(nn::LossBreakdown{le[e], lc[e], l2[e], lt[e]});
        }
        for (const nlohmann::json& p : f.at("points")) {
            fold.points.push_back(ScatterPoint{p.at(0).get<double>(), p.at(1).get<double>(),
                                               p.at(2).get<int>(), p.at(3).get<int>()});
        }
        report.folds.push_back(std::move(fold));
    }
    finalize_report(report);
    return report;
}

std::string loss_curves_csv(const LosoReport& report) {
    std::string out = "epoch,l_expertise,l_cog,l_total\n";
    for (size_t e = 0; e < report.mean_loss_curve.size(); ++e) {
        out += std::to_string(e + 1);
        for (double v : report.mean_loss_curve[e]) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::string scatter_csv(const LosoReport& report) {
    std::string out = "p_high_load,p_expert,true_expert,true_highload\n";
    for (const ScatterPoint& p : report.scatter) {
        out += detail::format_double(p.p_high_load);
        out += ',';
        out += detail::format_double(p.p_expert);
        out += ',';
        out += std::to_string(p.true_expert);
        out += ',';
        out += std::to_string(p.true_high_load);
        out += '\n';
    }
    return out;
}

}  // namespace hrvnet::eval
