#include "hrvnet/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "format.hpp"
#include "hrvnet/errors.hpp"

namespace hrvnet::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& path, size_t line_no,
                    const char* what) {
    double value{};
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                              ": cannot parse " + what + " from '" + s + "'");
    }
    return value;
}

long parse_long(const std::string& s, const std::filesystem::path& path, size_t line_no,
                const char* what) {
    long value{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                              ": cannot parse " + what + " from '" + s + "'");
    }
    return value;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return lines;
}

void expect_header(const std::vector<std::string>& lines, const std::string& expected,
                   const std::filesystem::path& path) {
    if (lines.empty()) {
        throw ValidationError(path.string() + ": empty file");
    }
    if (lines[0] != expected) {
        throw ValidationError(path.string() + ": expected header '" + expected + "', got '" +
                              lines[0] + "'");
    }
}

}  // namespace

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ValidationError("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        if (!out.flush()) {
            throw ValidationError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_ecg_csv(const std::filesystem::path& path, const signal::EcgRecord& record) {
    record.validate();
    std::string out = "time_s,mv\n";
    out.reserve(record.samples.size() * 20);
    for (size_t i = 0; i < record.samples.size(); ++i) {
        out += detail::format_double(static_cast<double>(i) / record.sampling_rate_hz);
        out += ',';
        out += detail::format_double(record.samples[i]);
        out += '\n';
    }
    atomic_write_file(path, out);
}

signal::EcgRecord ingest_ecg_csv(const std::filesystem::path& path, int channel_index) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) {
        throw ValidationError(path.string() + ": empty file");
    }
    const std::vector<std::string> header = split_csv_line(lines[0]);
    if (header.size() < 2 || header[0] != "time_s" || header[1].rfind("mv", 0) != 0) {
        throw ValidationError(path.string() + ": expected header 'time_s,mv[,...]', got '" +
                              lines[0] + "'");
    }
    const size_t n_channels = header.size() - 1;
    if (channel_index < 0 || static_cast<size_t>(channel_index) >= n_channels) {
        throw ValidationError(path.string() + ": channel index " + std::to_string(channel_index) +
                              " out of range (file has " + std::to_string(n_channels) +
                              " channel(s))");
    }

    std::vector<double> times, values;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        if (fields.size() != header.size()) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        }
        times.push_back(parse_double(fields[0], path, i + 1, "time_s"));
        values.push_back(parse_double(fields[1 + channel_index], path, i + 1, "mv"));
    }
    if (times.size() < 2) {
        throw ValidationError(path.string() + ": need at least 2 samples");
    }

    // Sampling rate from the median step; every step must stay within 1%.
    std::vector<double> steps(times.size() - 1);
    for (size_t i = 0; i + 1 < times.size(); ++i) {
        steps[i] = times[i + 1] - times[i];
    }
    std::vector<double> sorted = steps;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (!(median > 0.0)) {
        throw ValidationError(path.string() + ": timestamps are not increasing");
    }
    for (size_t i = 0; i < steps.size(); ++i) {
        if (std::abs(steps[i] - median) > 0.01 * median) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 3) +
                                  ": non-uniform timestamp spacing (step " +
                                  detail::format_double(steps[i]) + " s vs median " +
                                  detail::format_double(median) + " s)");
        }
    }

    signal::EcgRecord record;
    record.subject_id = path.stem().string();
    record.samples = std::move(values);
    record.sampling_rate_hz = 1.0 / median;
    record.validate();
    return record;
}

void write_annotations_csv(const std::filesystem::path& path,
                           const std::vector<CognitiveLoadAnnotation>& annotations) {
    std::string out = "subject_id,event_time_s,rating\n";
    for (const CognitiveLoadAnnotation& a : annotations) {
        out += a.subject_id;
        out += ',';
        out += detail::format_double(a.event_time_s);
        out += ',';
        out += std::to_string(a.rating);
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::vector<CognitiveLoadAnnotation> read_annotations_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    expect_header(lines, "subject_id,event_time_s,rating", path);
    std::vector<CognitiveLoadAnnotation> out;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        if (fields.size() != 3) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": expected 3 fields");
        }
        CognitiveLoadAnnotation a;
        a.subject_id = fields[0];
        a.event_time_s = parse_double(fields[1], path, i + 1, "event_time_s");
        a.rating = static_cast<int>(parse_long(fields[2], path, i + 1, "rating"));
        if (a.rating < 1 || a.rating > 9) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": rating " + std::to_string(a.rating) +
                                  " outside the 1..9 scale");
        }
        out.push_back(std::move(a));
    }
    return out;
}

void write_roster_csv(const std::filesystem::path& path, const std::map<std::string, int>& roster) {
    std::string out = "subject_id,expert\n";
    for (const auto& [id, expert] : roster) {
        out += id;
        out += ',';
        out += std::to_string(expert);
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::map<std::string, int> read_roster_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    expect_header(lines, "subject_id,expert", path);
    std::map<std::string, int> out;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        if (fields.size() != 2) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": expected 2 fields");
        }
        const long expert = parse_long(fields[1], path, i + 1, "expert");
        if (expert != 0 && expert != 1) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": expert flag must be 0 or 1");
        }
        out[fields[0]] = static_cast<int>(expert);
    }
    return out;
}

void write_peaks_csv(const std::filesystem::path& path, const signal::RPeakSeries& peaks) {
    std::string out = "peak_time_s\n";
    for (double t : peaks.peak_times_s) {
        out += detail::format_double(t);
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::string features_csv_header() {
    std::string header = "subject_id,window_start_s,segment,label_expert,label_highload";
    for (std::string_view name : hrv::feature_names()) {
        header += ',';
        header += name;
    }
    return header;
}

void write_features_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows) {
    std::string out = features_csv_header() + "\n";
    for (const FeatureRow& row : rows) {
        out += row.features.subject_id;
        out += ',';
        out += detail::format_double(row.features.window_start_s);
        out += ',';
        out += row.features.segment_kind == signal::SegmentKind::baseline ? "baseline"
                                                                          : "simulation";
        out += ',';
        out += std::to_string(row.label_expert);
        out += ',';
        out += std::to_string(row.label_highload);
        for (double v : row.features.values) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    expect_header(lines, features_csv_header(), path);
    std::vector<FeatureRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        if (fields.size() != 5 + hrv::kFeatureCount) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": expected " + std::to_string(5 + hrv::kFeatureCount) +
                                  " fields, got " + std::to_string(fields.size()));
        }
        FeatureRow row;
        row.features.subject_id = fields[0];
        row.features.window_start_s = parse_double(fields[1], path, i + 1, "window_start_s");
        if (fields[2] == "baseline") {
            row.features.segment_kind = signal::SegmentKind::baseline;
        } else if (fields[2] == "simulation") {
            row.features.segment_kind = signal::SegmentKind::simulation;
        } else {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 1) +
                                  ": unknown segment '" + fields[2] + "'");
        }
        row.label_expert = static_cast<int>(parse_long(fields[3], path, i + 1, "label_expert"));
        row.label_highload =
            static_cast<int>(parse_long(fields[4], path, i + 1, "label_highload"));
        for (int j = 0; j < hrv::kFeatureCount; ++j) {
            row.features.values[j] =
                parse_double(fields[5 + j], path, i + 1,
                             std::string(hrv::feature_names()[j]).c_str());
        }
        row.features.validate();
        rows.push_back(std::move(row));
    }
    return rows;
}

eval::SubjectDataset dataset_from_rows(const std::vector<FeatureRow>& rows) {
    eval::SubjectDataset dataset;
    for (const FeatureRow& row : rows) {
        if (row.features.segment_kind != signal::SegmentKind::simulation) continue;
        auto [it, inserted] = dataset.subjects.try_emplace(row.features.subject_id);
        if (inserted) {
            it->second.expert_label = row.label_expert;
        } else if (it->second.expert_label != row.label_expert) {
            throw ValidationError("features: subject " + row.features.subject_id +
                                  " has inconsistent expert labels");
        }
        eval::LabeledWindow window;
        window.features = row.features;
        window.labels = nn::MultitaskLabels{row.label_expert, row.label_highload};
        it->second.windows.push_back(std::move(window));
    }
    return dataset;
}

}  // namespace hrvnet::io
