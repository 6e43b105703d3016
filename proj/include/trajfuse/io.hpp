#pragma once

#include "trajfuse/core.hpp"
#include "trajfuse/fusion.hpp"
#include "trajfuse/metrics.hpp"

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace trajfuse::io {

inline constexpr int kFormatVersion = 1;

struct DatasetManifest {
    int format_version = kFormatVersion;
    std::string dataset_name;
    std::size_t horizon = 0;
    double dt = 0.0;
    std::vector<std::string> model_ids;
    std::size_t sample_count = 0;

    [[nodiscard]] bool has_model(const std::string& id) const;
    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct GroundTruthRecord {
    std::string sample_id;
    core::Trajectory trajectory;

    friend bool operator==(const GroundTruthRecord&, const GroundTruthRecord&) = default;
};

/// Throws ParseError naming the field at fault, IoError if unreadable.
[[nodiscard]] DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Line-by-line reader over a newline-delimited JSON file. Holds a single
/// line in memory at a time; blank lines are skipped.
class LineReader {
public:
    explicit LineReader(std::filesystem::path path);

    /// Next nonblank line, or nullopt at end of file.
    [[nodiscard]] std::optional<std::string> next();
    [[nodiscard]] std::size_t line_number() const noexcept { return line_; }
    [[nodiscard]] std::string where() const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

/// Streams ModelOutput records validated against the manifest.
class PredictionReader {
public:
    PredictionReader(const std::filesystem::path& path, const DatasetManifest& manifest);

    [[nodiscard]] std::optional<core::ModelOutput> next();

private:
    LineReader lines_;
    const DatasetManifest* manifest_;
};

/// Streams ground-truth records; rejects duplicate sample ids.
class GroundTruthReader {
public:
    GroundTruthReader(const std::filesystem::path& path, const DatasetManifest& manifest);

    [[nodiscard]] std::optional<GroundTruthRecord> next();

private:
    LineReader lines_;
    const DatasetManifest* manifest_;
    std::set<std::string> seen_;
};

/// Streams fused records written by write_fused.
class FusedReader {
public:
    explicit FusedReader(const std::filesystem::path& path);

    [[nodiscard]] std::optional<fusion::FusedPrediction> next();

private:
    LineReader lines_;
};

/// Convenience: drain a reader into a vector.
[[nodiscard]] std::vector<core::ModelOutput> load_predictions(const std::filesystem::path& path,
                                                              const DatasetManifest& manifest);
[[nodiscard]] std::vector<GroundTruthRecord> load_ground_truth(const std::filesystem::path& path,
                                                               const DatasetManifest& manifest);
[[nodiscard]] std::vector<fusion::FusedPrediction> load_fused(const std::filesystem::path& path);

/// Writers sort by sample_id (then model_id) before emitting.
void write_predictions(const std::filesystem::path& path, std::span<const core::ModelOutput> outputs);
void write_ground_truth(const std::filesystem::path& path, std::span<const GroundTruthRecord> records);
void write_fused(const std::filesystem::path& path, std::span<const fusion::FusedPrediction> fused);

/// Single-record encoders, exposed for tests and tooling.
[[nodiscard]] std::string encode_prediction(const core::ModelOutput& output);
[[nodiscard]] std::string encode_ground_truth(const GroundTruthRecord& record);
[[nodiscard]] std::string encode_fused(const fusion::FusedPrediction& fused);

enum class ReportFormat { csv, json };

[[nodiscard]] ReportFormat parse_report_format(const std::string& name);

/// Renders with 2 decimals in CSV and full precision in JSON.
[[nodiscard]] std::string render_summary(std::span<const metrics::SummaryRow> rows, std::span<const double> k_list,
                                         ReportFormat format);
[[nodiscard]] std::string render_overlap(const metrics::OverlapReport& report, double k_percent, ReportFormat format);

void write_summary(const std::filesystem::path& path, std::span<const metrics::SummaryRow> rows,
                   std::span<const double> k_list, ReportFormat format);
void write_overlap(const std::filesystem::path& path, const metrics::OverlapReport& report, double k_percent,
                   ReportFormat format);

/// Writes `content` verbatim, throwing IoError with the path on failure.
void write_text(const std::filesystem::path& path, const std::string& content);

/// Column label for a K value: "1" for 1.0, "2.5" for 2.5.
[[nodiscard]] std::string format_k(double k_percent);

}  // namespace trajfuse::io
