#include "trajfuse/synth.hpp"

#include "trajfuse/parallel.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace trajfuse::synth {

using core::Trajectory;
using core::Waypoint;

Rng::Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(index), hi(index)};
    engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view to_string(Maneuver m) noexcept {
    switch (m) {
        case Maneuver::straight: return "straight";
        case Maneuver::constant_turn: return "constant_turn";
        case Maneuver::lane_change: return "lane_change";
    }
    return "straight";
}

void ScenarioConfig::validate() const {
    if (sample_count < 1) throw InvalidInput("sample_count must be at least 1");
    if (horizon < 1) throw InvalidInput("horizon must be at least 1");
    if (!std::isfinite(dt) || dt <= 0.0) throw InvalidInput("dt must be positive");
    const double p[] = {mix.straight, mix.constant_turn, mix.lane_change};
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) throw InvalidInput("maneuver proportions must be nonnegative");
    }
    if (std::abs(p[0] + p[1] + p[2] - 1.0) > 1e-9) throw InvalidInput("maneuver proportions must sum to 1");
    if (!(speed_min >= 0.0 && speed_min <= speed_max && std::isfinite(speed_max))) {
        throw InvalidInput("speed range must satisfy 0 <= min <= max");
    }
    if (!(turn_rate_min >= 0.0 && turn_rate_min <= turn_rate_max && std::isfinite(turn_rate_max))) {
        throw InvalidInput("turn-rate range must satisfy 0 <= min <= max");
    }
    if (!std::isfinite(lane_width) || lane_width <= 0.0) throw InvalidInput("lane_width must be positive");
    if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) throw InvalidInput("noise sigma must be nonnegative");
}

Trajectory kinematic_trajectory(const InitialState& s, std::size_t horizon, double dt) {
    const double c = std::cos(s.heading);
    const double sn = std::sin(s.heading);
    const double duration = static_cast<double>(horizon) * dt;
    std::vector<Waypoint> pts;
    pts.reserve(horizon);
    for (std::size_t k = 1; k <= horizon; ++k) {
        const double t = static_cast<double>(k) * dt;
        double along = s.speed * t;
        double lateral = 0.0;
        if (s.maneuver == Maneuver::constant_turn && std::abs(s.turn_rate) > 1e-12) {
            // Exact constant-turn-rate arc, expressed in the heading frame.
            along = s.speed * std::sin(s.turn_rate * t) / s.turn_rate;
            lateral = s.speed * (1.0 - std::cos(s.turn_rate * t)) / s.turn_rate;
        } else if (s.maneuver == Maneuver::lane_change) {
            lateral = s.lateral_offset * 0.5 * (1.0 - std::cos(std::numbers::pi * t / duration));
        }
        pts.push_back({s.position.x + along * c - lateral * sn, s.position.y + along * sn + lateral * c});
    }
    return Trajectory(std::move(pts), dt);
}

std::string sample_id_for(std::size_t index, std::size_t count) {
    const auto digits = std::max<std::size_t>(6, std::to_string(count > 0 ? count - 1 : 0).size());
    auto s = std::to_string(index);
    return "s" + std::string(digits > s.size() ? digits - s.size() : 0, '0') + s;
}

Scenario generate_scenario(const ScenarioConfig& config, std::size_t index) {
    Rng rng(config.seed, 0, index);
    InitialState st;
    st.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    st.speed = rng.uniform(config.speed_min, config.speed_max);

    const double pick = rng.uniform();
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double magnitude = rng.uniform();
    if (pick < config.mix.straight) {
        st.maneuver = Maneuver::straight;
    } else if (pick < config.mix.straight + config.mix.constant_turn) {
        st.maneuver = Maneuver::constant_turn;
        st.turn_rate = sign * (config.turn_rate_min + (config.turn_rate_max - config.turn_rate_min) * magnitude);
    } else {
        st.maneuver = Maneuver::lane_change;
        st.lateral_offset = sign * config.lane_width * (0.5 + magnitude);
    }

    const auto clean = kinematic_trajectory(st, config.horizon, config.dt);
    std::vector<Waypoint> pts(clean.points().begin(), clean.points().end());
    if (config.noise_sigma > 0.0) {
        for (auto& p : pts) {
            p.x += config.noise_sigma * rng.normal();
            p.y += config.noise_sigma * rng.normal();
        }
    }
    return {index, sample_id_for(index, config.sample_count), st, Trajectory(std::move(pts), config.dt)};
}

std::vector<Scenario> generate_scenarios(const ScenarioConfig& config, unsigned threads) {
    config.validate();
    return parallel_map(config.sample_count, threads, [&](std::size_t i) { return generate_scenario(config, i); });
}

std::string_view to_string(PredictorKind k) noexcept {
    switch (k) {
        case PredictorKind::const_velocity: return "const_velocity";
        case PredictorKind::const_turn_rate: return "const_turn_rate";
        case PredictorKind::noisy_oracle: return "noisy_oracle";
    }
    return "const_velocity";
}

PredictorKind parse_predictor_kind(std::string_view name) {
    if (name == "const_velocity") return PredictorKind::const_velocity;
    if (name == "const_turn_rate") return PredictorKind::const_turn_rate;
    if (name == "noisy_oracle") return PredictorKind::noisy_oracle;
    throw InvalidInput("unknown predictor kind '" + std::string(name) + "'");
}

void PredictorSpec::validate() const {
    if (model_id.empty()) throw InvalidInput("predictor model_id must be nonempty");
    if (mode_count < 1) throw InvalidInput("predictor '" + model_id + "' needs at least one mode");
    if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
        throw InvalidInput("predictor '" + model_id + "' noise sigma must be nonnegative");
    }
    if (!std::isfinite(temperature) || temperature <= 0.0) {
        throw InvalidInput("predictor '" + model_id + "' temperature must be positive");
    }
    if (!std::isfinite(bias.x) || !std::isfinite(bias.y)) {
        throw InvalidInput("predictor '" + model_id + "' bias must be finite");
    }
    if (!std::isfinite(lateral_spacing) || !std::isfinite(turn_rate_spacing)) {
        throw InvalidInput("predictor '" + model_id + "' hypothesis spacing must be finite");
    }
}

int hypothesis_offset(std::size_t mode) noexcept {
    const auto step = static_cast<int>((mode + 1) / 2);
    return mode % 2 == 1 ? step : -step;
}

std::vector<double> error_confidences(std::span<const double> errors, double temperature) {
    std::vector<double> conf;
    conf.reserve(errors.size());
    double total = 0.0;
    for (double e : errors) {
        conf.push_back(std::exp(-e / temperature));
        total += conf.back();
    }
    if (total > 1.0) {
        for (auto& c : conf) c /= total;
    }
    return conf;
}

namespace {

Trajectory hypothesis(const PredictorSpec& spec, const Scenario& sc, int offset) {
    const auto horizon = sc.ground_truth.horizon();
    const double dt = sc.ground_truth.dt();
    InitialState st = sc.state;
    switch (spec.kind) {
        case PredictorKind::const_velocity:
            st.turn_rate = 0.0;
            st.maneuver = offset == 0 ? Maneuver::straight : Maneuver::lane_change;
            st.lateral_offset = offset * spec.lateral_spacing;
            return kinematic_trajectory(st, horizon, dt);
        case PredictorKind::const_turn_rate:
            st.maneuver = Maneuver::constant_turn;
            st.turn_rate = sc.state.turn_rate + offset * spec.turn_rate_spacing;
            return kinematic_trajectory(st, horizon, dt);
        case PredictorKind::noisy_oracle:
            return sc.ground_truth;
    }
    return sc.ground_truth;
}

}  // namespace

core::ModelOutput run_predictor(const PredictorSpec& spec, const Scenario& scenario, std::uint64_t seed,
                                std::uint64_t stream) {
    spec.validate();
    Rng rng(seed, stream, scenario.index);

    core::ModelOutput out;
    out.model_id = spec.model_id;
    out.sample_id = scenario.sample_id;
    std::vector<double> errors;
    for (std::size_t k = 0; k < spec.mode_count; ++k) {
        const auto base = hypothesis(spec, scenario, hypothesis_offset(k));
        std::vector<Waypoint> pts(base.points().begin(), base.points().end());
        for (auto& p : pts) {
            p.x += spec.bias.x;
            p.y += spec.bias.y;
            if (spec.noise_sigma > 0.0) {
                p.x += spec.noise_sigma * rng.normal();
                p.y += spec.noise_sigma * rng.normal();
            }
        }
        Trajectory traj(std::move(pts), base.dt());
        errors.push_back(core::ade(traj, scenario.ground_truth));
        out.modes.push_back({std::move(traj), 0.0});
    }
    const auto conf = error_confidences(errors, spec.temperature);
    for (std::size_t k = 0; k < conf.size(); ++k) out.modes[k].confidence = conf[k];
    return out;
}

std::string ensemble_method_id(fusion::Strategy s) { return "ensemble_" + std::string(fusion::to_string(s)); }

ScenarioConfig default_scenario_config() { return ScenarioConfig{}; }

std::vector<PredictorSpec> default_predictor_bank() {
    // Comparable noise levels so averaging pays off wherever two members agree;
    // T = 2 m lets the best member clear the default tau on easy samples.
    PredictorSpec ctrv;
    ctrv.model_id = "ctrv";
    ctrv.kind = PredictorKind::const_turn_rate;
    ctrv.noise_sigma = 0.4;
    ctrv.mode_count = 3;
    ctrv.temperature = 2.0;

    PredictorSpec cv = ctrv;
    cv.model_id = "cv";
    cv.kind = PredictorKind::const_velocity;

    PredictorSpec oracle = ctrv;
    oracle.model_id = "oracle";
    oracle.kind = PredictorKind::noisy_oracle;
    oracle.noise_sigma = 0.8;

    return {ctrv, cv, oracle};
}

ExperimentResult synth_experiment(const ScenarioConfig& config, std::span<const PredictorSpec> predictors,
                                  const ExperimentOptions& options) {
    config.validate();
    if (predictors.size() < 2) throw InvalidInput("an experiment needs at least two predictors");
    std::set<std::string> ids;
    for (const auto& p : predictors) {
        p.validate();
        if (!ids.insert(p.model_id).second) throw InvalidInput("duplicate predictor '" + p.model_id + "'");
    }
    fusion::FuseOptions fuse_opts;
    fuse_opts.primary_model_id = options.primary_model_id.value_or(predictors.front().model_id);
    fuse_opts.tau = options.tau;
    if (!ids.contains(*fuse_opts.primary_model_id)) {
        throw InvalidInput("primary model '" + *fuse_opts.primary_model_id + "' is not a predictor");
    }

    ExperimentResult result;
    result.manifest.dataset_name = "synthetic";
    result.manifest.horizon = config.horizon;
    result.manifest.dt = config.dt;
    result.manifest.sample_count = config.sample_count;
    for (const auto& p : predictors) result.manifest.model_ids.push_back(p.model_id);

    result.scenarios = generate_scenarios(config, options.threads);

    auto samples = parallel_map(result.scenarios.size(), options.threads, [&](std::size_t i) {
        const auto& sc = result.scenarios[i];
        core::Sample s{sc.sample_id, sc.ground_truth, {}};
        for (std::size_t p = 0; p < predictors.size(); ++p) {
            s.outputs.push_back(run_predictor(predictors[p], sc, config.seed, 1 + p));
        }
        return s;
    });

    for (const auto& s : samples) {
        for (const auto& o : s.outputs) result.outputs.push_back(o);
    }

    auto table = metrics::most_likely_predictions(samples);
    for (auto strategy : options.strategies) {
        fuse_opts.strategy = strategy;
        auto fused = parallel_map(samples.size(), options.threads,
                                  [&](std::size_t i) { return fusion::fuse(samples[i], fuse_opts); });
        auto& column = table[ensemble_method_id(strategy)];
        for (const auto& f : fused) {
            column.insert_or_assign(f.sample_id, f.trajectory);
            for (const auto& w : f.warnings) result.warnings.push_back(w);
        }
        result.fused[strategy] = std::move(fused);
    }

    auto built = metrics::build_ledger(samples, table);
    result.ledger = std::move(built.ledger);
    for (auto& w : built.warnings) result.warnings.push_back(std::move(w));
    result.summary = metrics::summary_table(result.ledger, options.k_list, options.sort_key);
    return result;
}

}  // namespace trajfuse::synth
