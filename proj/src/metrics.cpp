#include "trajfuse/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace trajfuse::metrics {

std::string_view to_string(Metric m) noexcept { return m == Metric::ade ? "ade" : "fde"; }

void ErrorLedger::add(const std::string& method_id, const std::string& sample_id, ErrorPair errors) {
    if (method_id.empty() || sample_id.empty()) throw InvalidInput("ledger keys must be nonempty");
    for (double v : {errors.ade, errors.fde}) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidInput("ledger value for (" + method_id + ", " + sample_id + ") is not a valid error");
        }
    }
    if (!rows_[method_id].emplace(sample_id, errors).second) {
        throw InvalidInput("duplicate ledger row (" + method_id + ", " + sample_id + ")");
    }
}

bool ErrorLedger::has_method(const std::string& method_id) const { return rows_.contains(method_id); }

std::vector<std::string> ErrorLedger::methods() const {
    std::vector<std::string> out;
    out.reserve(rows_.size());
    for (const auto& [id, _] : rows_) out.push_back(id);
    return out;
}

const ErrorLedger::Rows& ErrorLedger::rows(const std::string& method_id) const {
    const auto it = rows_.find(method_id);
    if (it == rows_.end() || it->second.empty()) {
        throw InvalidInput("ledger has no rows for method '" + method_id + "'");
    }
    return it->second;
}

std::size_t ErrorLedger::row_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, rows] : rows_) n += rows.size();
    return n;
}

LedgerBuild build_ledger(std::span<const core::Sample> samples, const PredictionTable& predictions) {
    LedgerBuild out;
    for (const auto& [method, per_sample] : predictions) {
        for (const auto& sample : samples) {
            const auto it = per_sample.find(sample.sample_id);
            if (it == per_sample.end()) {
                out.warnings.push_back("missing_prediction: method '" + method + "' has no prediction for sample '" +
                                       sample.sample_id + "'");
                continue;
            }
            out.ledger.add(method, sample.sample_id,
                           {core::ade(it->second, sample.ground_truth), core::fde(it->second, sample.ground_truth)});
        }
    }
    return out;
}

PredictionTable most_likely_predictions(std::span<const core::Sample> samples) {
    PredictionTable table;
    for (const auto& sample : samples) {
        for (const auto& out : sample.outputs) {
            auto ml = core::select_most_likely(out);
            table[out.model_id].insert_or_assign(sample.sample_id, std::move(ml.trajectory));
        }
    }
    return table;
}

std::size_t top_k_count(double k_percent, std::size_t n) {
    if (!(k_percent > 0.0 && k_percent <= 100.0)) {
        throw InvalidInput("k_percent must lie in (0, 100]");
    }
    // Multiply before dividing so integer K on integer N stays exact.
    const double raw = std::ceil(k_percent * static_cast<double>(n) / 100.0);
    return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, std::max<std::size_t>(n, 1));
}

namespace {

struct Ranked {
    const std::string* sample_id;
    double value;
};

std::vector<Ranked> rank(const ErrorLedger::Rows& rows, Metric metric) {
    std::vector<Ranked> ranked;
    ranked.reserve(rows.size());
    for (const auto& [id, e] : rows) ranked.push_back({&id, e.get(metric)});
    // Map iteration is already in sample_id order, so a stable sort breaks ties lexicographically.
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.value > b.value; });
    return ranked;
}

double mean_of_prefix(const std::vector<Ranked>& ranked, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += ranked[i].value;
    return sum / static_cast<double>(n);
}

}  // namespace

TopKResult top_k_error(const ErrorLedger& ledger, const std::string& method_id, Metric metric, double k_percent) {
    const auto& rows = ledger.rows(method_id);
    const auto ranked = rank(rows, metric);
    TopKResult out;
    out.method_id = method_id;
    out.metric = metric;
    out.k_percent = k_percent;
    out.member_count = top_k_count(k_percent, ranked.size());
    out.mean_error = mean_of_prefix(ranked, out.member_count);
    out.sample_ids.reserve(out.member_count);
    for (std::size_t i = 0; i < out.member_count; ++i) out.sample_ids.push_back(*ranked[i].sample_id);
    return out;
}

ErrorPair cross_evaluate(const ErrorLedger& ledger, const std::string& difficulty_of, const std::string& evaluate,
                         double k_percent, Metric rank_by) {
    const auto hard = top_k_error(ledger, difficulty_of, rank_by, k_percent);
    const auto& rows = ledger.rows(evaluate);
    ErrorPair sum;
    for (const auto& id : hard.sample_ids) {
        const auto it = rows.find(id);
        if (it == rows.end()) {
            throw InvalidInput("method '" + evaluate + "' has no row for sample '" + id + "'");
        }
        sum.ade += it->second.ade;
        sum.fde += it->second.fde;
    }
    const auto n = static_cast<double>(hard.sample_ids.size());
    return {sum.ade / n, sum.fde / n};
}

std::vector<SummaryRow> summary_table(const ErrorLedger& ledger, std::span<const double> k_list, SortKey sort_key) {
    std::vector<SummaryRow> table;
    for (const auto& method : ledger.methods()) {
        const auto& rows = ledger.rows(method);
        const auto by_ade = rank(rows, Metric::ade);
        const auto by_fde = rank(rows, Metric::fde);

        SummaryRow row;
        row.method_id = method;
        for (double k : k_list) {
            const auto n = top_k_count(k, rows.size());
            TopKCell cell{k, mean_of_prefix(by_ade, n), 0.0};
            if (sort_key == SortKey::independent) {
                cell.fde = mean_of_prefix(by_fde, n);
            } else {
                double sum = 0.0;
                for (std::size_t i = 0; i < n; ++i) sum += rows.at(*by_ade[i].sample_id).fde;
                cell.fde = sum / static_cast<double>(n);
            }
            row.cells.push_back(cell);
        }
        double ade_sum = 0.0;
        double fde_sum = 0.0;
        for (const auto& [_, e] : rows) {
            ade_sum += e.ade;
            fde_sum += e.fde;
        }
        row.overall_ade = ade_sum / static_cast<double>(rows.size());
        row.overall_fde = fde_sum / static_cast<double>(rows.size());
        table.push_back(std::move(row));
    }
    return table;
}

double OverlapReport::percent_of(std::size_t model, std::size_t count) const {
    const auto size = set_sizes.at(model);
    return size == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(size);
}

OverlapReport overlap_report(const std::map<std::string, std::set<std::string>>& sets) {
    if (sets.size() < 2) throw InvalidInput("overlap analysis needs at least two sets");
    if (sets.size() > kMaxOverlapSets) {
        throw InvalidInput("overlap analysis supports at most " + std::to_string(kMaxOverlapSets) + " sets");
    }
    OverlapReport report;
    std::vector<const std::set<std::string>*> members;
    for (const auto& [id, s] : sets) {
        report.model_ids.push_back(id);
        report.set_sizes.push_back(s.size());
        members.push_back(&s);
    }
    const auto m = members.size();

    auto count_in_all = [&](std::initializer_list<std::size_t> idx) {
        const auto& base = *members[*idx.begin()];
        return static_cast<std::size_t>(std::count_if(base.begin(), base.end(), [&](const std::string& id) {
            return std::all_of(idx.begin(), idx.end(), [&](std::size_t j) { return members[j]->contains(id); });
        }));
    };
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            report.pairs.push_back({a, b, count_in_all({a, b})});
            for (std::size_t c = b + 1; c < m; ++c) report.triples.push_back({a, b, c, count_in_all({a, b, c})});
        }
    }

    std::map<std::string, std::uint32_t> membership;
    for (std::size_t i = 0; i < m; ++i) {
        for (const auto& id : *members[i]) membership[id] |= (std::uint32_t{1} << i);
    }
    const std::uint32_t all = (std::uint32_t{1} << m) - 1;
    report.exclusive.assign(m, 0);
    for (const auto& [_, mask] : membership) {
        ++report.regions[mask];
        if (mask == all) ++report.common_all;
        if (std::has_single_bit(mask)) ++report.exclusive[static_cast<std::size_t>(std::countr_zero(mask))];
    }
    report.union_size = membership.size();
    return report;
}

}  // namespace trajfuse::metrics
