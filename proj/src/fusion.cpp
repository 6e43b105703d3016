#include "trajfuse/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace trajfuse::fusion {

using core::Trajectory;
using core::Waypoint;

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::weighted: return "weighted";
        case Strategy::simple: return "simple";
        case Strategy::threshold: return "threshold";
    }
    return "weighted";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "weighted") return Strategy::weighted;
    if (name == "simple") return Strategy::simple;
    if (name == "threshold") return Strategy::threshold;
    throw InvalidInput("unknown strategy '" + std::string(name) + "'");
}

std::vector<double> normalize_confidences(std::span<const double> confidences) {
    if (confidences.empty()) throw InvalidInput("cannot normalize an empty confidence list");
    double total = 0.0;
    for (double c : confidences) {
        if (!std::isfinite(c) || c < 0.0) {
            throw InvalidInput("confidences must be finite and nonnegative");
        }
        total += c;
    }
    if (total <= 0.0) throw ZeroConfidence("all member confidences are zero");
    std::vector<double> weights;
    weights.reserve(confidences.size());
    for (double c : confidences) weights.push_back(c / total);
    return weights;
}

namespace {

void check_members(std::span<const Trajectory> trajectories, std::span<const double> weights) {
    if (trajectories.empty()) throw InvalidInput("ensemble has no members");
    if (trajectories.size() != weights.size()) {
        throw InvalidInput("weight count " + std::to_string(weights.size()) +
                           " does not match member count " + std::to_string(trajectories.size()));
    }
    for (const auto& traj : trajectories) {
        core::require_same_horizon(traj, trajectories.front(), "ensemble member");
    }
}

}  // namespace

Trajectory weighted_average(std::span<const Trajectory> trajectories, std::span<const double> weights) {
    check_members(trajectories, weights);
    const auto horizon = trajectories.front().horizon();
    std::vector<Waypoint> points(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        Waypoint lo = trajectories.front()[t];
        Waypoint hi = lo;
        for (std::size_t i = 0; i < trajectories.size(); ++i) {
            const auto& p = trajectories[i][t];
            points[t].x += weights[i] * p.x;
            points[t].y += weights[i] * p.y;
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        }
        // Round-off can push the sum just outside the members' hull; pin it back.
        points[t].x = std::clamp(points[t].x, lo.x, hi.x);
        points[t].y = std::clamp(points[t].y, lo.y, hi.y);
    }
    return Trajectory(std::move(points), trajectories.front().dt());
}

Eigen::Matrix2d step_covariance(std::span<const Trajectory> trajectories, std::span<const double> weights,
                                const Trajectory& fused, std::size_t t) {
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const Eigen::Vector2d d(trajectories[i][t].x - fused[t].x, trajectories[i][t].y - fused[t].y);
        cov.noalias() += weights[i] * (d * d.transpose());
    }
    return cov;
}

Eigen::Matrix2d aggregate_over_horizon(std::span<const Eigen::Matrix2d> per_step) {
    Eigen::Matrix2d sum = Eigen::Matrix2d::Zero();
    for (const auto& m : per_step) sum += m;
    return sum / static_cast<double>(per_step.size());
}

CovarianceSummary ensemble_covariance(std::span<const Trajectory> trajectories, std::span<const double> weights,
                                      const Trajectory& fused) {
    check_members(trajectories, weights);
    core::require_same_horizon(fused, trajectories.front(), "fused trajectory");

    std::vector<Eigen::Matrix2d> per_step;
    per_step.reserve(fused.horizon());
    for (std::size_t t = 0; t < fused.horizon(); ++t) {
        per_step.push_back(step_covariance(trajectories, weights, fused, t));
    }
    CovarianceSummary out;
    out.matrix = aggregate_over_horizon(per_step);
    // Symmetric by construction; mirror the off-diagonal to remove round-off.
    out.matrix(1, 0) = out.matrix(0, 1);

    const double det = out.matrix(0, 0) * out.matrix(1, 1) - out.matrix(0, 1) * out.matrix(1, 0);
    const double scale = std::max(1.0, out.matrix(0, 0) * out.matrix(1, 1));
    if (det < -kDeterminantTolerance * scale) {
        throw NumericalError("ensemble covariance has a negative determinant " + std::to_string(det));
    }
    out.determinant = std::max(det, 0.0);
    return out;
}

double ensemble_confidence(const CovarianceSummary& cov) {
    if (!std::isfinite(cov.determinant) || cov.determinant < -kDeterminantTolerance) {
        throw NumericalError("determinant " + std::to_string(cov.determinant) + " is not a valid dispersion");
    }
    return 1.0 / (1.0 + std::max(cov.determinant, 0.0));
}

namespace {

struct Members {
    std::vector<std::string> ids;
    std::vector<Trajectory> trajectories;
    std::vector<double> confidences;
};

// Most-likely mode of every member, ordered by model_id so results do not
// depend on the order outputs were supplied in.
Members collect_members(const core::Sample& sample) {
    if (sample.outputs.empty()) {
        throw InvalidInput("sample '" + sample.sample_id + "' has no model outputs");
    }
    std::vector<core::MostLikely> picked;
    picked.reserve(sample.outputs.size());
    for (const auto& out : sample.outputs) {
        out.validate();
        picked.push_back(core::select_most_likely(out));
    }
    std::sort(picked.begin(), picked.end(),
              [](const auto& a, const auto& b) { return a.model_id < b.model_id; });
    Members m;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        if (i > 0 && picked[i].model_id == picked[i - 1].model_id) {
            throw InvalidInput("duplicate model '" + picked[i].model_id + "' in sample '" +
                               sample.sample_id + "'");
        }
        if (i > 0) {
            core::require_same_horizon(picked[i].trajectory, m.trajectories.front(),
                                       "sample '" + sample.sample_id + "'");
        }
        m.ids.push_back(picked[i].model_id);
        m.trajectories.push_back(std::move(picked[i].trajectory));
        m.confidences.push_back(picked[i].confidence);
    }
    return m;
}

std::vector<double> uniform_weights(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> confidence_weights(const Members& m, const std::string& sample_id,
                                       std::vector<std::string>& warnings) {
    try {
        return normalize_confidences(m.confidences);
    } catch (const ZeroConfidence&) {
        warnings.push_back("zero_confidence: all member confidences are zero for sample '" + sample_id +
                           "'; using uniform weights");
        return uniform_weights(m.ids.size());
    }
}

FusedPrediction assemble(const core::Sample& sample, const Members& m, std::vector<double> weights,
                         Trajectory trajectory, const Trajectory& weighted_mean, Strategy strategy,
                         std::vector<std::string> warnings) {
    FusedPrediction out;
    out.sample_id = sample.sample_id;
    out.covariance = ensemble_covariance(m.trajectories, weights, weighted_mean);
    out.confidence = ensemble_confidence(out.covariance);
    out.trajectory = std::move(trajectory);
    out.strategy = strategy;
    out.warnings = std::move(warnings);
    out.weights.reserve(m.ids.size());
    for (std::size_t i = 0; i < m.ids.size(); ++i) out.weights.push_back({m.ids[i], weights[i]});
    return out;
}

}  // namespace

FusedPrediction fuse_weighted(const core::Sample& sample) {
    const auto m = collect_members(sample);
    std::vector<std::string> warnings;
    auto weights = confidence_weights(m, sample.sample_id, warnings);
    auto fused = weighted_average(m.trajectories, weights);
    return assemble(sample, m, std::move(weights), fused, fused, Strategy::weighted, std::move(warnings));
}

FusedPrediction fuse_simple(const core::Sample& sample) {
    const auto m = collect_members(sample);
    auto weights = uniform_weights(m.ids.size());
    auto fused = weighted_average(m.trajectories, weights);
    return assemble(sample, m, std::move(weights), fused, fused, Strategy::simple, {});
}

FusedPrediction fuse_threshold(const core::Sample& sample, const std::string& primary_model_id, double tau) {
    if (!std::isfinite(tau) || tau < 0.0) throw InvalidInput("tau must be finite and nonnegative");
    const auto m = collect_members(sample);
    const auto it = std::find(m.ids.begin(), m.ids.end(), primary_model_id);
    if (it == m.ids.end()) {
        throw InvalidInput("primary model '" + primary_model_id + "' is absent from sample '" +
                           sample.sample_id + "'");
    }
    const auto primary = static_cast<std::size_t>(it - m.ids.begin());

    std::vector<std::string> warnings;
    auto weights = confidence_weights(m, sample.sample_id, warnings);
    auto weighted = weighted_average(m.trajectories, weights);
    auto chosen = m.confidences[primary] >= tau ? m.trajectories[primary] : weighted;
    return assemble(sample, m, std::move(weights), std::move(chosen), weighted, Strategy::threshold,
                    std::move(warnings));
}

FusedPrediction fuse(const core::Sample& sample, const FuseOptions& options) {
    switch (options.strategy) {
        case Strategy::weighted: return fuse_weighted(sample);
        case Strategy::simple: return fuse_simple(sample);
        case Strategy::threshold:
            if (!options.primary_model_id) {
                throw InvalidInput("threshold strategy requires a primary model");
            }
            return fuse_threshold(sample, *options.primary_model_id, options.tau);
    }
    throw InvalidInput("unknown strategy");
}

bool flag_low_confidence(const FusedPrediction& fused, double floor) noexcept {
    return fused.confidence < floor;
}

}  // namespace trajfuse::fusion
