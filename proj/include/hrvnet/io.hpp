#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hrvnet/eval.hpp"
#include "hrvnet/hrv.hpp"
#include "hrvnet/signal.hpp"

namespace hrvnet::io {

// All writers go through a temp file + rename so interrupted runs never
// leave partial outputs behind.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// ECG CSV: header "time_s,mv" (extra mv columns allowed for multi-channel
// sources). Ingestion validates uniform spacing within 1% jitter around the
// median step and infers the sampling rate from it. Malformed rows are
// reported with their line number.
void write_ecg_csv(const std::filesystem::path& path, const signal::EcgRecord& record);
signal::EcgRecord ingest_ecg_csv(const std::filesystem::path& path, int channel_index = 0);

struct CognitiveLoadAnnotation {
    std::string subject_id;
    double event_time_s = 0.0;
    int rating = 0;  // 1..9
};

// Annotations CSV: header "subject_id,event_time_s,rating".
void write_annotations_csv(const std::filesystem::path& path,
                           const std::vector<CognitiveLoadAnnotation>& annotations);
std::vector<CognitiveLoadAnnotation> read_annotations_csv(const std::filesystem::path& path);

// Roster CSV: header "subject_id,expert".
void write_roster_csv(const std::filesystem::path& path, const std::map<std::string, int>& roster);
std::map<std::string, int> read_roster_csv(const std::filesystem::path& path);

// Peak times CSV: header "peak_time_s".
void write_peaks_csv(const std::filesystem::path& path, const signal::RPeakSeries& peaks);

struct FeatureRow {
    hrv::FeatureVector features;
    int label_expert = 0;
    int label_highload = 0;
};

// Features CSV: header "subject_id,window_start_s,segment,label_expert,
// label_highload," + the 20 canonical feature names; one row per valid window.
std::string features_csv_header();
void write_features_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);

// Builds the LOSO dataset from feature rows; only simulation-segment rows
// participate (baseline rows are reference output).
eval::SubjectDataset dataset_from_rows(const std::vector<FeatureRow>& rows);

}  // namespace hrvnet::io
