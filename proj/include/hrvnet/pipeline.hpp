#pragma once

#include <span>
#include <string>
#include <vector>

#include "hrvnet/config.hpp"
#include "hrvnet/io.hpp"

namespace hrvnet::cli {

// Each window takes the rating of the annotation nearest to its center time;
// high load when rating >= threshold. Throws when no annotations exist or a
// rating leaves the 1..9 scale.
std::vector<int> label_windows(std::span<const signal::Window> windows,
                               std::span<const io::CognitiveLoadAnnotation> annotations,
                               int rating_threshold);

struct WindowSkip {
    double start_s = 0.0;
    std::string reason;
};

struct SubjectFeatures {
    std::vector<io::FeatureRow> rows;  // baseline row first, then simulation windows
    std::vector<WindowSkip> skipped;
};

// Full per-subject pipeline: detect R-peaks on baseline and simulation
// records, compute baseline features over the whole baseline record, window
// the simulation, extract and normalize per-window features, and attach
// labels. Windows that cannot support the full feature set are skipped with
// a reason.
SubjectFeatures extract_subject_features(const signal::EcgRecord& baseline,
                                         const signal::EcgRecord& simulation,
                                         std::span<const io::CognitiveLoadAnnotation> annotations,
                                         int expert_label, const RunConfig& config);

}  // namespace hrvnet::cli
