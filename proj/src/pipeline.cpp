#include "hrvnet/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "hrvnet/errors.hpp"

namespace hrvnet::cli {

std::vector<int> label_windows(std::span<const signal::Window> windows,
                               std::span<const io::CognitiveLoadAnnotation> annotations,
                               int rating_threshold) {
    if (annotations.empty()) {
        throw ValidationError("label_windows: no annotations for this subject");
    }
    if (rating_threshold < 1 || rating_threshold > 9) {
        throw ValidationError("label_windows: rating threshold must be in 1..9");
    }
    for (const io::CognitiveLoadAnnotation& a : annotations) {
        if (a.rating < 1 || a.rating > 9) {
            throw ValidationError("label_windows: rating " + std::to_string(a.rating) +
                                  " outside the 1..9 scale");
        }
    }

    std::vector<int> labels;
    labels.reserve(windows.size());
    for (const signal::Window& w : windows) {
        const double center = w.start_s + w.length_s / 2.0;
        const io::CognitiveLoadAnnotation* nearest = &annotations[0];
        for (const io::CognitiveLoadAnnotation& a : annotations) {
            if (std::abs(a.event_time_s - center) <
                std::abs(nearest->event_time_s - center)) {
                nearest = &a;
            }
        }
        labels.push_back(nearest->rating >= rating_threshold ? 1 : 0);
    }
    return labels;
}

namespace {

// Features of one peak set; nullopt (with a reason) when the window cannot
// support the full 20-feature vector.
std::optional<hrv::FeatureVector> features_for_peaks(const signal::RPeakSeries& peaks,
                                                     const std::string& subject_id,
                                                     double window_start_s,
                                                     signal::SegmentKind kind,
                                                     std::string* reason) {
    if (peaks.peak_times_s.size() < 2) {
        if (reason) *reason = "fewer than 2 peaks";
        return std::nullopt;
    }
    const hrv::RrSeries rr = hrv::rr_intervals(peaks);
    if (rr.intervals_ms.size() < 3) {
        if (reason) *reason = "fewer than 3 valid RR intervals";
        return std::nullopt;
    }
    if (rr.intervals_ms.size() < 4) {
        if (reason) *reason = "fewer than 4 valid RR intervals for spectral analysis";
        return std::nullopt;
    }
    const hrv::TimeFeatures t = hrv::time_domain_features(rr);
    const hrv::Psd psd = hrv::lomb_psd(rr);
    const std::optional<hrv::FreqFeatures> f = hrv::frequency_domain_features(psd);
    if (!f) {
        if (reason) *reason = "no HF-band power; ratio features undefined";
        return std::nullopt;
    }
    return hrv::make_feature_vector(subject_id, window_start_s, kind, t, *f);
}

}  // namespace

SubjectFeatures extract_subject_features(const signal::EcgRecord& baseline,
                                         const signal::EcgRecord& simulation,
                                         std::span<const io::CognitiveLoadAnnotation> annotations,
                                         int expert_label, const RunConfig& config) {
    if (baseline.subject_id != simulation.subject_id) {
        throw ValidationError("extract_subject_features: baseline and simulation subject ids differ");
    }
    if (baseline.segment_kind != signal::SegmentKind::baseline) {
        throw ValidationError("extract_subject_features: baseline record is not a baseline segment");
    }

    // Baseline features come from the whole baseline record as one window.
    const signal::RPeakSeries baseline_peaks = signal::detect_r_peaks(
        baseline, config.filter.low_hz, config.filter.high_hz, config.filter.order);
    std::string reason;
    const std::optional<hrv::FeatureVector> baseline_features = features_for_peaks(
        baseline_peaks, baseline.subject_id, 0.0, signal::SegmentKind::baseline, &reason);
    if (!baseline_features) {
        throw ValidationError("extract_subject_features: baseline unusable (" + reason + ")");
    }

    const signal::RPeakSeries sim_peaks = signal::detect_r_peaks(
        simulation, config.filter.low_hz, config.filter.high_hz, config.filter.order);
    const signal::WindowingResult windowing =
        signal::segment_windows(sim_peaks, simulation.duration_s());

    SubjectFeatures out;
    out.rows.push_back(io::FeatureRow{*baseline_features, expert_label, 0});
    if (windowing.duration_too_short) {
        out.skipped.push_back({0.0, "simulation record shorter than one window"});
        return out;
    }

    const std::vector<int> load_labels =
        label_windows(windowing.windows, annotations, config.load_rating_threshold);

    for (size_t i = 0; i < windowing.windows.size(); ++i) {
        const signal::Window& window = windowing.windows[i];
        if (!window.usable()) {
            out.skipped.push_back({window.start_s, "fewer than 4 peaks"});
            continue;
        }
        signal::RPeakSeries window_peaks;
        window_peaks.source_subject = simulation.subject_id;
        window_peaks.peak_times_s = window.peak_times_s;
        const std::optional<hrv::FeatureVector> fv =
            features_for_peaks(window_peaks, simulation.subject_id, window.start_s,
                               signal::SegmentKind::simulation, &reason);
        if (!fv) {
            out.skipped.push_back({window.start_s, reason});
            continue;
        }
        const hrv::FeatureVector normalized =
            hrv::normalize_features(*fv, *baseline_features, config.normalization);
        out.rows.push_back(io::FeatureRow{normalized, expert_label, load_labels[i]});
    }
    return out;
}

}  // namespace hrvnet::cli
