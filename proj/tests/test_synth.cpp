#include "trajfuse/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace trajfuse;
using synth::InitialState;
using synth::Maneuver;
using synth::PredictorKind;
using synth::PredictorSpec;

namespace {

PredictorSpec spec(const std::string& id, PredictorKind kind, double sigma, std::size_t modes, double t = 1.0) {
    PredictorSpec p;
    p.model_id = id;
    p.kind = kind;
    p.noise_sigma = sigma;
    p.mode_count = modes;
    p.temperature = t;
    return p;
}

synth::ScenarioConfig small_config(std::size_t n, double noise = 0.1) {
    auto c = synth::default_scenario_config();
    c.sample_count = n;
    c.noise_sigma = noise;
    return c;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j);
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
        i = j + 1;
    }
    return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Rng, DeterministicAndStreamSeparated) {
    synth::Rng a(7, 1, 3), b(7, 1, 3), c(7, 2, 3);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
        differs |= x != c.uniform();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, NormalMoments) {
    synth::Rng r(1, 0, 0);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Kinematics, Straight) {
    InitialState s;
    s.speed = 1.0;
    const auto t = synth::kinematic_trajectory(s, 3, 0.5);
    EXPECT_EQ(t, core::Trajectory({{0.5, 0}, {1.0, 0}, {1.5, 0}}, 0.5));
}

TEST(Kinematics, QuarterTurn) {
    InitialState s;
    s.speed = 1.0;
    s.turn_rate = std::numbers::pi / 2;
    s.maneuver = Maneuver::constant_turn;
    const auto t = synth::kinematic_trajectory(s, 1, 1.0);
    EXPECT_NEAR(t[0].x, 2 / std::numbers::pi, 1e-12);
    EXPECT_NEAR(t[0].y, 2 / std::numbers::pi, 1e-12);
}

TEST(Kinematics, LaneChangeEndsAtOffset) {
    InitialState s;
    s.speed = 10.0;
    s.heading = std::numbers::pi / 2;
    s.maneuver = Maneuver::lane_change;
    s.lateral_offset = 3.5;
    const auto t = synth::kinematic_trajectory(s, 12, 0.5);
    // Heading north: lateral (left) is -x.
    EXPECT_NEAR(t.back().x, -3.5, 1e-12);
    EXPECT_NEAR(t.back().y, 60.0, 1e-12);
}

TEST(Scenarios, DeterministicAndThreadIndependent) {
    const auto cfg = small_config(300);
    const auto a = synth::generate_scenarios(cfg, 1);
    const auto b = synth::generate_scenarios(cfg, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].sample_id, b[i].sample_id);
        EXPECT_EQ(a[i].ground_truth, b[i].ground_truth);
    }
    EXPECT_EQ(a[0].sample_id, "s000000");
    auto other = cfg;
    other.seed = 8;
    EXPECT_NE(synth::generate_scenarios(other)[0].ground_truth, a[0].ground_truth);
}

TEST(Scenarios, RoughMixProportions) {
    const auto all = synth::generate_scenarios(small_config(5000));
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& s : all) ++counts[static_cast<int>(s.state.maneuver)];
    EXPECT_NEAR(counts[0] / 5000.0, 0.4, 0.03);
    EXPECT_NEAR(counts[1] / 5000.0, 0.3, 0.03);
    EXPECT_NEAR(counts[2] / 5000.0, 0.3, 0.03);
}

TEST(Scenarios, InvalidConfig) {
    auto c = small_config(10);
    c.sample_count = 0;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = small_config(10);
    c.mix = {0.5, 0.5, 0.5};
    EXPECT_THROW(c.validate(), InvalidInput);
    c = small_config(10);
    c.dt = 0;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = small_config(10);
    c.speed_min = 5;
    c.speed_max = 1;
    EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(Predictor, HypothesisOrder) {
    EXPECT_EQ(synth::hypothesis_offset(0), 0);
    EXPECT_EQ(synth::hypothesis_offset(1), 1);
    EXPECT_EQ(synth::hypothesis_offset(2), -1);
    EXPECT_EQ(synth::hypothesis_offset(3), 2);
    EXPECT_EQ(synth::hypothesis_offset(4), -2);
}

TEST(Predictor, ErrorConfidences) {
    const auto one = synth::error_confidences(std::vector<double>{0.0}, 1.0);
    EXPECT_EQ(one[0], 1.0);
    const auto c = synth::error_confidences(std::vector<double>{0.1, 2.0, 0.5}, 1.0);
    EXPECT_GT(c[0], c[2]);
    EXPECT_GT(c[2], c[1]);
    EXPECT_NEAR(c[0] + c[1] + c[2], 1.0, 1e-12);
    const auto far = synth::error_confidences(std::vector<double>{5.0, 6.0}, 1.0);
    EXPECT_NEAR(far[0], std::exp(-5.0), 1e-15);
}

TEST(Predictor, PerfectOracle) {
    const auto sc = synth::generate_scenario(small_config(10), 3);
    const auto out = synth::run_predictor(spec("o", PredictorKind::noisy_oracle, 0.0, 1), sc, 7);
    ASSERT_EQ(out.modes.size(), 1u);
    EXPECT_EQ(out.modes[0].trajectory, sc.ground_truth);
    EXPECT_EQ(out.modes[0].confidence, 1.0);
}

TEST(Predictor, ConstantVelocityMatchesStraightScenario) {
    const auto cfg = small_config(200, 0.0);
    for (const auto& sc : synth::generate_scenarios(cfg)) {
        if (sc.state.maneuver != Maneuver::straight) continue;
        const auto out = synth::run_predictor(spec("cv", PredictorKind::const_velocity, 0.0, 3), sc, 7);
        EXPECT_NEAR(core::ade(out.modes[0].trajectory, sc.ground_truth), 0.0, 1e-9);
        EXPECT_EQ(core::most_likely_index(out.modes), 0u);
    }
}

TEST(Predictor, ConstantVelocityOnTurnMatchesChordDeviation) {
    const double v = 8.0, dt = 0.5;
    const std::size_t h = 12;
    double previous = 0.0;
    for (double w : {0.05, 0.1, 0.2, 0.3, 0.4}) {
        synth::Scenario sc;
        sc.sample_id = "s";
        sc.state.speed = v;
        sc.state.turn_rate = w;
        sc.state.maneuver = Maneuver::constant_turn;
        sc.ground_truth = synth::kinematic_trajectory(sc.state, h, dt);
        const auto out = synth::run_predictor(spec("cv", PredictorKind::const_velocity, 0.0, 1), sc, 1);
        double expected = 0;
        for (std::size_t k = 1; k <= h; ++k) {
            const double t = static_cast<double>(k) * dt;
            const double a = t - std::sin(w * t) / w;
            const double b = (1 - std::cos(w * t)) / w;
            expected += v * std::sqrt(a * a + b * b);
        }
        expected /= static_cast<double>(h);
        const double got = core::ade(out.modes[0].trajectory, sc.ground_truth);
        EXPECT_NEAR(got, expected, 1e-9);
        EXPECT_GT(got, previous);
        previous = got;
    }
}

TEST(Predictor, Deterministic) {
    const auto sc = synth::generate_scenario(small_config(10), 5);
    const auto p = spec("c", PredictorKind::const_turn_rate, 0.4, 3);
    const auto a = synth::run_predictor(p, sc, 7, 2);
    const auto b = synth::run_predictor(p, sc, 7, 2);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(a.modes[k].trajectory, b.modes[k].trajectory);
        EXPECT_EQ(a.modes[k].confidence, b.modes[k].confidence);
    }
    EXPECT_NE(synth::run_predictor(p, sc, 7, 3).modes[0].trajectory, a.modes[0].trajectory);
}

TEST(Predictor, InvalidSpec) {
    EXPECT_THROW(spec("", PredictorKind::const_velocity, 0, 1).validate(), InvalidInput);
    EXPECT_THROW(spec("a", PredictorKind::const_velocity, 0, 0).validate(), InvalidInput);
    EXPECT_THROW(spec("a", PredictorKind::const_velocity, -1, 1).validate(), InvalidInput);
    EXPECT_THROW(spec("a", PredictorKind::const_velocity, 0, 1, 0.0).validate(), InvalidInput);
    EXPECT_THROW((void)synth::parse_predictor_kind("lstm"), InvalidInput);
}

TEST(Experiment, OracleDominance) {
    const std::vector<PredictorSpec> bank{spec("oracle", PredictorKind::noisy_oracle, 0.0, 1),
                                          spec("cv", PredictorKind::const_velocity, 0.4, 3, 0.02)};
    const auto r = synth::synth_experiment(small_config(500), bank);
    const auto rows = metrics::summary_table(r.ledger);
    for (const auto& row : rows) {
        if (row.method_id == "ensemble_weighted") EXPECT_LT(row.overall_ade, 1e-3);
    }
}

TEST(Experiment, SymmetricBiasCancels) {
    auto plus = spec("plus", PredictorKind::noisy_oracle, 0.0, 1);
    auto minus = plus;
    minus.model_id = "minus";
    plus.bias = {0.6, -0.3};
    minus.bias = {-0.6, 0.3};
    const std::vector<PredictorSpec> bank{plus, minus};
    const auto r =
        synth::synth_experiment(small_config(300, 0.0), bank, {.strategies = {fusion::Strategy::weighted}});
    const auto& ens = r.ledger.rows("ensemble_weighted");
    const auto& a = r.ledger.rows("plus");
    const auto& b = r.ledger.rows("minus");
    for (const auto& [id, e] : ens) {
        EXPECT_LT(e.ade, std::min(a.at(id).ade, b.at(id).ade));
        EXPECT_LT(e.ade, 1e-9);
    }
}

TEST(Experiment, NeedsTwoDistinctPredictors) {
    const auto cfg = small_config(5);
    const std::vector<PredictorSpec> one{spec("a", PredictorKind::const_velocity, 0, 1)};
    EXPECT_THROW((void)synth::synth_experiment(cfg, one), InvalidInput);
    const std::vector<PredictorSpec> dup{one[0], one[0]};
    EXPECT_THROW((void)synth::synth_experiment(cfg, dup), InvalidInput);
    const std::vector<PredictorSpec> two{one[0], spec("b", PredictorKind::noisy_oracle, 0, 1)};
    synth::ExperimentOptions opts;
    opts.primary_model_id = "zzz";
    EXPECT_THROW((void)synth::synth_experiment(cfg, two, opts), InvalidInput);
}

TEST(Experiment, ThreadCountDoesNotChangeLedger) {
    const auto bank = synth::default_predictor_bank();
    synth::ExperimentOptions one, four;
    four.threads = 4;
    const auto a = synth::synth_experiment(small_config(400), bank, one);
    const auto b = synth::synth_experiment(small_config(400), bank, four);
    EXPECT_EQ(a.ledger, b.ledger);
}

TEST(Experiment, MemberConfidenceTracksError) {
    const auto r = synth::synth_experiment(synth::default_scenario_config(), synth::default_predictor_bank(),
                                           {.strategies = {fusion::Strategy::weighted}});
    std::map<std::string, const core::Trajectory*> gt;
    for (const auto& s : r.scenarios) gt[s.sample_id] = &s.ground_truth;
    std::vector<double> conf, neg_err;
    for (const auto& out : r.outputs) {
        const auto ml = core::select_most_likely(out);
        conf.push_back(ml.confidence);
        neg_err.push_back(-core::ade(ml.trajectory, *gt.at(out.sample_id)));
    }
    const double rho = pearson(ranks(conf), ranks(neg_err));
    EXPECT_GT(rho, 0.2) << "spearman " << rho;
}
