#pragma once

#include "trajfuse/core.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajfuse::metrics {

enum class Metric { ade, fde };

[[nodiscard]] std::string_view to_string(Metric m) noexcept;

struct ErrorPair {
    double ade = 0.0;
    double fde = 0.0;

    [[nodiscard]] double get(Metric m) const noexcept { return m == Metric::ade ? ade : fde; }
    friend bool operator==(const ErrorPair&, const ErrorPair&) = default;
};

/// Per-sample errors keyed by (method_id, sample_id).
class ErrorLedger {
public:
    using Rows = std::map<std::string, ErrorPair>;

    /// Throws InvalidInput on a duplicate key or a negative/non-finite value.
    void add(const std::string& method_id, const std::string& sample_id, ErrorPair errors);

    [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }
    [[nodiscard]] bool has_method(const std::string& method_id) const;
    [[nodiscard]] std::vector<std::string> methods() const;
    /// Throws InvalidInput for an unknown method.
    [[nodiscard]] const Rows& rows(const std::string& method_id) const;
    [[nodiscard]] std::size_t row_count() const noexcept;

    friend bool operator==(const ErrorLedger&, const ErrorLedger&) = default;

private:
    std::map<std::string, Rows> rows_;
};

using PredictionTable = std::map<std::string, std::map<std::string, core::Trajectory>>;

struct LedgerBuild {
    ErrorLedger ledger;
    std::vector<std::string> warnings;
};

/// Scores every method against the samples' ground truth. A method missing
/// a sample loses that row and produces one warning.
[[nodiscard]] LedgerBuild build_ledger(std::span<const core::Sample> samples, const PredictionTable& predictions);

/// Most-likely trajectory of every member, keyed by model_id then sample_id.
[[nodiscard]] PredictionTable most_likely_predictions(std::span<const core::Sample> samples);

/// ceil(k/100 * n), at least 1.
[[nodiscard]] std::size_t top_k_count(double k_percent, std::size_t n);

struct TopKResult {
    std::string method_id;
    Metric metric = Metric::ade;
    double k_percent = 0.0;
    std::size_t member_count = 0;
    double mean_error = 0.0;
    /// Members in rank order: largest error first, ties by ascending sample_id.
    std::vector<std::string> sample_ids;

    [[nodiscard]] std::set<std::string> id_set() const { return {sample_ids.begin(), sample_ids.end()}; }
};

[[nodiscard]] TopKResult top_k_error(const ErrorLedger& ledger, const std::string& method_id, Metric metric,
                                     double k_percent);

/// Mean ADE/FDE of `evaluate` over the top-K% set of `difficulty_of` (ranked by `rank_by`).
[[nodiscard]] ErrorPair cross_evaluate(const ErrorLedger& ledger, const std::string& difficulty_of,
                                       const std::string& evaluate, double k_percent,
                                       Metric rank_by = Metric::ade);

/// How the FDE columns of a summary pick their Top-K set.
enum class SortKey { independent, ade };

struct TopKCell {
    double k_percent = 0.0;
    double ade = 0.0;
    double fde = 0.0;
};

struct SummaryRow {
    std::string method_id;
    std::vector<TopKCell> cells;
    double overall_ade = 0.0;
    double overall_fde = 0.0;
};

inline const std::vector<double> kDefaultKList{1, 2, 3, 4, 5, 10};

/// One row per method, in method_id order.
[[nodiscard]] std::vector<SummaryRow> summary_table(const ErrorLedger& ledger,
                                                    std::span<const double> k_list = kDefaultKList,
                                                    SortKey sort_key = SortKey::independent);

struct PairOverlap {
    std::size_t first = 0;
    std::size_t second = 0;
    std::size_t count = 0;
};

struct TripleOverlap {
    std::size_t first = 0;
    std::size_t second = 0;
    std::size_t third = 0;
    std::size_t count = 0;
};

/// Venn-style breakdown of several long-tail sets. Indices refer to `model_ids`.
struct OverlapReport {
    std::vector<std::string> model_ids;
    std::vector<std::size_t> set_sizes;
    std::vector<PairOverlap> pairs;
    std::vector<TripleOverlap> triples;
    /// Samples present in every set.
    std::size_t common_all = 0;
    /// Samples present in exactly one set, per model.
    std::vector<std::size_t> exclusive;
    std::size_t union_size = 0;
    /// Count of samples per exact membership pattern (bit i = in set i).
    std::map<std::uint32_t, std::size_t> regions;

    /// Percentage of model i's set that `count` represents (0 for an empty set).
    [[nodiscard]] double percent_of(std::size_t model, std::size_t count) const;
};

inline constexpr std::size_t kMaxOverlapSets = 16;

/// Throws InvalidInput for fewer than 2 or more than kMaxOverlapSets sets.
[[nodiscard]] OverlapReport overlap_report(const std::map<std::string, std::set<std::string>>& sets);

}  // namespace trajfuse::metrics
