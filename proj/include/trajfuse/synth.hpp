#pragma once

#include "trajfuse/core.hpp"
#include "trajfuse/fusion.hpp"
#include "trajfuse/io.hpp"
#include "trajfuse/metrics.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajfuse::synth {

/// Portable random stream: std::mt19937_64 (algorithm fixed by the standard)
/// seeded through std::seed_seq, with hand-written uniform and Box-Muller
/// normal transforms because the std distributions are implementation-defined.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    double normal();

private:
    std::mt19937_64 engine_;
};

enum class Maneuver { straight, constant_turn, lane_change };

[[nodiscard]] std::string_view to_string(Maneuver m) noexcept;

struct ManeuverMix {
    double straight = 0.4;
    double constant_turn = 0.3;
    double lane_change = 0.3;
};

struct ScenarioConfig {
    std::size_t sample_count = 10000;
    std::size_t horizon = 12;
    double dt = 0.5;
    ManeuverMix mix;
    double speed_min = 2.0;
    double speed_max = 15.0;
    /// Turn-rate magnitude range; the sign is drawn separately.
    double turn_rate_min = 0.05;
    double turn_rate_max = 0.4;
    /// Nominal lateral displacement of a lane change; each sample scales it by U(0.5, 1.5).
    double lane_width = 3.5;
    double noise_sigma = 0.1;
    std::uint64_t seed = 7;

    /// Throws InvalidInput.
    void validate() const;
};

/// Kinematic state at t = 0 plus the maneuver that follows it.
struct InitialState {
    core::Waypoint position;
    double heading = 0.0;
    double speed = 0.0;
    double turn_rate = 0.0;
    Maneuver maneuver = Maneuver::straight;
    /// Signed lateral displacement reached at the end of the horizon (lane change only).
    double lateral_offset = 0.0;
};

struct Scenario {
    std::size_t index = 0;
    std::string sample_id;
    InitialState state;
    core::Trajectory ground_truth;
};

/// Noise-free future positions at t = dt, 2dt, ..., horizon*dt.
[[nodiscard]] core::Trajectory kinematic_trajectory(const InitialState& state, std::size_t horizon, double dt);

/// Zero-padded so lexicographic order equals index order.
[[nodiscard]] std::string sample_id_for(std::size_t index, std::size_t count);

[[nodiscard]] Scenario generate_scenario(const ScenarioConfig& config, std::size_t index);
[[nodiscard]] std::vector<Scenario> generate_scenarios(const ScenarioConfig& config, unsigned threads = 1);

enum class PredictorKind { const_velocity, const_turn_rate, noisy_oracle };

[[nodiscard]] std::string_view to_string(PredictorKind k) noexcept;
[[nodiscard]] PredictorKind parse_predictor_kind(std::string_view name);

struct PredictorSpec {
    std::string model_id;
    PredictorKind kind = PredictorKind::const_velocity;
    double noise_sigma = 0.0;
    std::size_t mode_count = 1;
    /// Softness of the error-to-confidence map, meters.
    double temperature = 1.0;
    /// Constant offset added to every predicted waypoint.
    core::Waypoint bias;
    /// Lateral step between lane-change hypotheses (const_velocity).
    double lateral_spacing = 3.5;
    /// Turn-rate step between hypotheses (const_turn_rate), rad/s.
    double turn_rate_spacing = 0.1;

    void validate() const;
};

/// Hypothesis index sequence 0, +1, -1, +2, -2, ...
[[nodiscard]] int hypothesis_offset(std::size_t mode) noexcept;

/// Confidence of each mode from its error against ground truth:
/// exp(-e_k / T), renormalized to sum to one only when the sum exceeds one.
[[nodiscard]] std::vector<double> error_confidences(std::span<const double> errors, double temperature);

/// Random draws come from Rng(seed, stream, scenario.index), so each
/// (predictor stream, sample) pair is independent of evaluation order.
[[nodiscard]] core::ModelOutput run_predictor(const PredictorSpec& spec, const Scenario& scenario,
                                              std::uint64_t seed, std::uint64_t stream = 1);

struct ExperimentOptions {
    std::vector<fusion::Strategy> strategies{fusion::Strategy::weighted, fusion::Strategy::simple,
                                             fusion::Strategy::threshold};
    /// Defaults to the first predictor when unset.
    std::optional<std::string> primary_model_id;
    double tau = fusion::kDefaultTau;
    std::vector<double> k_list = metrics::kDefaultKList;
    metrics::SortKey sort_key = metrics::SortKey::independent;
    unsigned threads = 1;
};

struct ExperimentResult {
    io::DatasetManifest manifest;
    std::vector<Scenario> scenarios;
    std::vector<core::ModelOutput> outputs;
    std::map<fusion::Strategy, std::vector<fusion::FusedPrediction>> fused;
    metrics::ErrorLedger ledger;
    std::vector<metrics::SummaryRow> summary;
    std::vector<std::string> warnings;
};

/// Ledger method id of a fused strategy, e.g. "ensemble_weighted".
[[nodiscard]] std::string ensemble_method_id(fusion::Strategy s);

/// The pinned verification bed: 10,000 samples and three heterogeneous predictors.
[[nodiscard]] ScenarioConfig default_scenario_config();
[[nodiscard]] std::vector<PredictorSpec> default_predictor_bank();

/// generate -> predict -> fuse per strategy -> ledger -> summary.
[[nodiscard]] ExperimentResult synth_experiment(const ScenarioConfig& config, std::span<const PredictorSpec> predictors,
                                                const ExperimentOptions& options = {});

}  // namespace trajfuse::synth
