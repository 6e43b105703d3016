#include "trajfuse/metrics.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace trajfuse;
using metrics::ErrorLedger;
using metrics::Metric;

namespace {

std::string sid(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04d", i);
    return buf;
}

ErrorLedger ledger_from(const std::string& method, const std::vector<double>& ades) {
    ErrorLedger l;
    for (std::size_t i = 0; i < ades.size(); ++i) l.add(method, sid(static_cast<int>(i + 1)), {ades[i], ades[i]});
    return l;
}

std::set<std::string> ids(std::initializer_list<int> xs) {
    std::set<std::string> r;
    for (int x : xs) r.insert(sid(x));
    return r;
}

}  // namespace

TEST(ErrorLedger, AddAndQuery) {
    ErrorLedger l;
    l.add("a", "s1", {1.0, 2.0});
    l.add("b", "s1", {0.5, 0.5});
    EXPECT_TRUE(l.has_method("a"));
    EXPECT_FALSE(l.has_method("c"));
    EXPECT_EQ(l.methods(), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(l.row_count(), 2u);
    EXPECT_EQ(l.rows("a").at("s1"), (metrics::ErrorPair{1.0, 2.0}));
    EXPECT_THROW(l.add("a", "s1", {1.0, 1.0}), InvalidInput);
    EXPECT_THROW(l.add("a", "s2", {-1.0, 1.0}), InvalidInput);
    EXPECT_THROW(l.add("a", "s3", {NAN, 1.0}), InvalidInput);
    EXPECT_THROW((void)l.rows("zzz"), InvalidInput);
}

TEST(BuildLedger, MissingPredictionWarns) {
    core::Trajectory gt({{0, 0}, {0, 0}}, 0.5);
    std::vector<core::Sample> samples{{"s1", gt, {}}, {"s2", gt, {}}};
    metrics::PredictionTable table;
    table["m"].emplace("s1", core::Trajectory({{3, 4}, {0, 1}}, 0.5));
    const auto built = metrics::build_ledger(samples, table);
    EXPECT_EQ(built.warnings.size(), 1u);
    EXPECT_EQ(built.ledger.rows("m").size(), 1u);
    EXPECT_NEAR(built.ledger.rows("m").at("s1").ade, 3.0, 1e-12);
    EXPECT_NEAR(built.ledger.rows("m").at("s1").fde, 1.0, 1e-12);
}

TEST(TopKCount, Rounding) {
    EXPECT_EQ(metrics::top_k_count(10, 100), 10u);
    EXPECT_EQ(metrics::top_k_count(10, 101), 11u);
    EXPECT_EQ(metrics::top_k_count(1, 5), 1u);
    EXPECT_EQ(metrics::top_k_count(100, 7), 7u);
    EXPECT_EQ(metrics::top_k_count(0.001, 3), 1u);
    EXPECT_THROW((void)metrics::top_k_count(0, 10), InvalidInput);
    EXPECT_THROW((void)metrics::top_k_count(101, 10), InvalidInput);
}

TEST(TopKError, OneToHundred) {
    std::vector<double> e;
    for (int i = 1; i <= 100; ++i) e.push_back(i);
    const auto r = metrics::top_k_error(ledger_from("m", e), "m", Metric::ade, 10);
    EXPECT_EQ(r.member_count, 10u);
    EXPECT_DOUBLE_EQ(r.mean_error, 95.5);
    std::set<std::string> expected;
    for (int i = 91; i <= 100; ++i) expected.insert(sid(i));
    EXPECT_EQ(r.id_set(), expected);
    EXPECT_EQ(r.sample_ids.front(), sid(100));
}

TEST(TopKError, ConstantErrorsBreakTiesById) {
    const auto r = metrics::top_k_error(ledger_from("m", std::vector<double>(50, 2.0)), "m", Metric::ade, 10);
    EXPECT_DOUBLE_EQ(r.mean_error, 2.0);
    EXPECT_EQ(r.sample_ids, (std::vector<std::string>{sid(1), sid(2), sid(3), sid(4), sid(5)}));
}

TEST(TopKError, FullPercentIsOverallMean) {
    const auto r = metrics::top_k_error(ledger_from("m", {1, 2, 3, 6}), "m", Metric::fde, 100);
    EXPECT_DOUBLE_EQ(r.mean_error, 3.0);
    EXPECT_EQ(r.member_count, 4u);
}

TEST(TopKError, MatchesBruteForce) {
    test::Gen gen(21);
    for (int iter = 0; iter < 200; ++iter) {
        const auto n = gen.index(1, 400);
        std::map<std::string, double> errs;
        ErrorLedger l;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse values force plenty of ties.
            const double e = gen.coin() ? std::floor(gen.uniform(0, 5)) : gen.uniform(0, 5);
            errs[sid(static_cast<int>(i))] = e;
            l.add("m", sid(static_cast<int>(i)), {e, e});
        }
        const double k = gen.uniform(0.1, 100);
        std::vector<std::string> expected;
        const double mean = test::brute_force_top_k(errs, k, &expected);
        const auto r = metrics::top_k_error(l, "m", Metric::ade, k);
        ASSERT_EQ(r.sample_ids, expected);
        ASSERT_NEAR(r.mean_error, mean, 1e-12 * std::max(1.0, mean));
    }
}

TEST(CrossEvaluate, SelfAndHandBuilt) {
    ErrorLedger l;
    // a's hardest two (K = 50%): s3, s4.
    l.add("a", "s1", {1, 1});
    l.add("a", "s2", {2, 2});
    l.add("a", "s3", {3, 3});
    l.add("a", "s4", {4, 9});
    l.add("b", "s1", {9, 9});
    l.add("b", "s2", {9, 9});
    l.add("b", "s3", {0.5, 1});
    l.add("b", "s4", {1.5, 2});
    const auto self = metrics::cross_evaluate(l, "a", "a", 50);
    EXPECT_DOUBLE_EQ(self.ade, metrics::top_k_error(l, "a", Metric::ade, 50).mean_error);
    const auto cross = metrics::cross_evaluate(l, "a", "b", 50);
    EXPECT_DOUBLE_EQ(cross.ade, 1.0);
    EXPECT_DOUBLE_EQ(cross.fde, 1.5);
}

TEST(CrossEvaluate, ZeroErrors) {
    ErrorLedger l = ledger_from("a", {1, 2, 3, 4});
    for (int i = 1; i <= 4; ++i) l.add("z", sid(i), {0, 0});
    const auto r = metrics::cross_evaluate(l, "a", "z", 25);
    EXPECT_EQ(r.ade, 0.0);
    EXPECT_EQ(r.fde, 0.0);
}

TEST(CrossEvaluate, MissingSampleIsInvalid) {
    ErrorLedger l = ledger_from("a", {1, 2, 3, 4});
    l.add("b", sid(1), {0, 0});
    EXPECT_THROW((void)metrics::cross_evaluate(l, "a", "b", 25), InvalidInput);
}

TEST(SummaryTable, ConstantLedger) {
    const auto rows = metrics::summary_table(ledger_from("m", std::vector<double>(200, 2.0)));
    ASSERT_EQ(rows.size(), 1u);
    for (const auto& c : rows[0].cells) {
        EXPECT_DOUBLE_EQ(c.ade, 2.0);
        EXPECT_DOUBLE_EQ(c.fde, 2.0);
    }
    EXPECT_DOUBLE_EQ(rows[0].overall_ade, 2.0);
}

TEST(SummaryTable, HandLedgerMatchesBruteForce) {
    ErrorLedger l;
    std::map<std::string, double> ade, fde;
    const double a[] = {0.3, 1.7, 0.9, 2.2, 0.1, 5.0, 1.1, 0.4, 3.3, 0.8};
    const double f[] = {0.6, 1.0, 4.1, 2.0, 0.2, 0.9, 3.0, 0.5, 7.7, 1.9};
    for (int i = 0; i < 10; ++i) {
        l.add("m", sid(i), {a[i], f[i]});
        ade[sid(i)] = a[i];
        fde[sid(i)] = f[i];
    }
    const std::vector<double> ks{10, 20, 50, 100};
    const auto rows = metrics::summary_table(l, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
        EXPECT_NEAR(rows[0].cells[i].ade, test::brute_force_top_k(ade, ks[i]), 1e-12);
        EXPECT_NEAR(rows[0].cells[i].fde, test::brute_force_top_k(fde, ks[i]), 1e-12);
    }
    // Ranked by ADE the 10% FDE cell is the FDE of s5 (the ADE max).
    const auto by_ade = metrics::summary_table(l, ks, metrics::SortKey::ade);
    EXPECT_DOUBLE_EQ(by_ade[0].cells[0].fde, 0.9);
    EXPECT_DOUBLE_EQ(rows[0].cells[0].fde, 7.7);
}

TEST(SummaryTable, MonotoneInK) {
    test::Gen gen(8);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<double> e;
        for (std::size_t i = 0, n = gen.index(1, 300); i < n; ++i) e.push_back(gen.uniform(0, 10));
        const std::vector<double> ks{1, 2, 3, 4, 5, 10, 50, 100};
        const auto rows = metrics::summary_table(ledger_from("m", e), ks);
        for (std::size_t i = 1; i < ks.size(); ++i) {
            EXPECT_LE(rows[0].cells[i].ade, rows[0].cells[i - 1].ade * (1 + 1e-12));
        }
        EXPECT_LE(rows[0].overall_ade, rows[0].cells.back().ade * (1 + 1e-12));
    }
}

TEST(Overlap, ThreeSets) {
    const auto r = metrics::overlap_report({{"A", ids({1, 2, 3})}, {"B", ids({2, 3, 4})}, {"C", ids({3, 4, 5})}});
    EXPECT_EQ(r.model_ids, (std::vector<std::string>{"A", "B", "C"}));
    ASSERT_EQ(r.pairs.size(), 3u);
    EXPECT_EQ(r.pairs[0].count, 2u);  // A∩B
    EXPECT_EQ(r.pairs[1].count, 1u);  // A∩C
    EXPECT_EQ(r.pairs[2].count, 2u);  // B∩C
    ASSERT_EQ(r.triples.size(), 1u);
    EXPECT_EQ(r.triples[0].count, 1u);
    EXPECT_EQ(r.common_all, 1u);
    EXPECT_EQ(r.exclusive, (std::vector<std::size_t>{1, 0, 1}));
    EXPECT_EQ(r.union_size, 5u);
    EXPECT_NEAR(r.percent_of(0, r.common_all), 100.0 / 3.0, 1e-12);
}

TEST(Overlap, IdenticalAndDisjoint) {
    const auto same = metrics::overlap_report({{"A", ids({1, 2})}, {"B", ids({1, 2})}});
    EXPECT_EQ(same.common_all, 2u);
    EXPECT_EQ(same.exclusive, (std::vector<std::size_t>{0, 0}));
    const auto apart = metrics::overlap_report({{"A", ids({1, 2})}, {"B", ids({3})}});
    EXPECT_EQ(apart.common_all, 0u);
    EXPECT_EQ(apart.exclusive, (std::vector<std::size_t>{2, 1}));
    EXPECT_EQ(apart.union_size, 3u);
}

TEST(Overlap, NeedsTwoSets) {
    EXPECT_THROW((void)metrics::overlap_report({{"A", ids({1})}}), InvalidInput);
    EXPECT_THROW((void)metrics::overlap_report({}), InvalidInput);
}

TEST(Overlap, InclusionExclusion) {
    test::Gen gen(4);
    for (int iter = 0; iter < 200; ++iter) {
        std::map<std::string, std::set<std::string>> sets;
        for (const char* name : {"A", "B", "C"}) {
            auto& s = sets[name];
            for (std::size_t i = 0, n = gen.index(0, 40); i < n; ++i) s.insert(sid(static_cast<int>(gen.index(0, 60))));
        }
        const auto r = metrics::overlap_report(sets);
        const std::size_t sizes = r.set_sizes[0] + r.set_sizes[1] + r.set_sizes[2];
        const std::size_t pairs = r.pairs[0].count + r.pairs[1].count + r.pairs[2].count;
        ASSERT_EQ(r.union_size + pairs, sizes + r.triples[0].count);
        std::size_t regions = 0;
        for (const auto& [mask, count] : r.regions) regions += count;
        ASSERT_EQ(regions, r.union_size);
    }
}
