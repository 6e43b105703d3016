#pragma once

#include "trajfuse/core.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajfuse::fusion {

enum class Strategy { weighted, simple, threshold };

[[nodiscard]] std::string_view to_string(Strategy s) noexcept;
/// Throws InvalidInput on an unknown name.
[[nodiscard]] Strategy parse_strategy(std::string_view name);

struct WeightEntry {
    std::string model_id;
    double weight = 0.0;

    friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

/// Per-member normalized weights, ordered by model_id.
using Weights = std::vector<WeightEntry>;

struct CovarianceSummary {
    Eigen::Matrix2d matrix = Eigen::Matrix2d::Zero();
    double determinant = 0.0;
};

struct FusedPrediction {
    std::string sample_id;
    core::Trajectory trajectory;
    Weights weights;
    CovarianceSummary covariance;
    double confidence = 1.0;
    Strategy strategy = Strategy::weighted;
    std::vector<std::string> warnings;
};

/// Relative tolerance used to clamp round-off negative determinants to zero.
inline constexpr double kDeterminantTolerance = 1e-9;

/// c_i / sum_j c_j. Throws InvalidInput on negative or non-finite entries,
/// ZeroConfidence when every entry is zero.
[[nodiscard]] std::vector<double> normalize_confidences(std::span<const double> confidences);

/// Per-timestep convex combination of the member trajectories.
[[nodiscard]] core::Trajectory weighted_average(std::span<const core::Trajectory> trajectories,
                                                std::span<const double> weights);

/// Weighted dispersion of the members around `fused` at a single timestep.
[[nodiscard]] Eigen::Matrix2d step_covariance(std::span<const core::Trajectory> trajectories,
                                              std::span<const double> weights,
                                              const core::Trajectory& fused, std::size_t t);

/// Collapses the per-timestep 2x2 matrices into one. Currently the
/// arithmetic mean over the horizon.
[[nodiscard]] Eigen::Matrix2d aggregate_over_horizon(std::span<const Eigen::Matrix2d> per_step);

[[nodiscard]] CovarianceSummary ensemble_covariance(std::span<const core::Trajectory> trajectories,
                                                    std::span<const double> weights,
                                                    const core::Trajectory& fused);

/// 1 / (1 + det). Throws NumericalError if the determinant is negative beyond tolerance.
[[nodiscard]] double ensemble_confidence(const CovarianceSummary& cov);

[[nodiscard]] FusedPrediction fuse_weighted(const core::Sample& sample);
[[nodiscard]] FusedPrediction fuse_simple(const core::Sample& sample);
/// Uses the primary member verbatim when its most-likely confidence is at
/// least `tau`, otherwise the confidence-weighted result. Covariance and
/// confidence always come from the confidence-weighted ensemble.
[[nodiscard]] FusedPrediction fuse_threshold(const core::Sample& sample,
                                             const std::string& primary_model_id, double tau);

inline constexpr double kDefaultTau = 0.75;

struct FuseOptions {
    Strategy strategy = Strategy::weighted;
    std::optional<std::string> primary_model_id;
    double tau = kDefaultTau;
};

[[nodiscard]] FusedPrediction fuse(const core::Sample& sample, const FuseOptions& options);

/// Strictly below the floor.
[[nodiscard]] bool flag_low_confidence(const FusedPrediction& fused, double floor) noexcept;

}  // namespace trajfuse::fusion
