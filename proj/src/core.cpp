#include "trajfuse/core.hpp"

#include <cmath>
#include <set>

namespace trajfuse::core {

Trajectory::Trajectory(std::vector<Waypoint> points, double dt)
    : points_(std::move(points)), dt_(dt) {
    if (points_.empty()) {
        throw InvalidInput("trajectory must contain at least one waypoint");
    }
    if (!std::isfinite(dt_) || dt_ <= 0.0) {
        throw InvalidInput("trajectory dt must be finite and positive");
    }
    for (const auto& p : points_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw InvalidInput("trajectory waypoint is not finite");
        }
    }
}

void ModelOutput::validate() const {
    if (model_id.empty()) throw InvalidInput("model output has empty model_id");
    if (sample_id.empty()) throw InvalidInput("model output has empty sample_id");
    if (modes.empty()) {
        throw InvalidInput("model '" + model_id + "' has no modes for sample '" + sample_id + "'");
    }
    const auto horizon = modes.front().trajectory.horizon();
    for (const auto& mode : modes) {
        if (!std::isfinite(mode.confidence) || mode.confidence < 0.0) {
            throw InvalidInput("model '" + model_id + "' has an invalid confidence for sample '" +
                               sample_id + "'");
        }
        if (mode.trajectory.horizon() != horizon) {
            throw HorizonMismatch("model '" + model_id + "' sample '" + sample_id +
                                  "': modes have horizons " + std::to_string(horizon) + " and " +
                                  std::to_string(mode.trajectory.horizon()));
        }
    }
}

void Sample::validate() const {
    if (sample_id.empty()) throw InvalidInput("sample has empty sample_id");
    std::set<std::string> seen;
    for (const auto& out : outputs) {
        out.validate();
        if (!seen.insert(out.model_id).second) {
            throw InvalidInput("duplicate model '" + out.model_id + "' in sample '" + sample_id + "'");
        }
        require_same_horizon(out.modes.front().trajectory, ground_truth,
                             "sample '" + sample_id + "' model '" + out.model_id + "'");
    }
}

std::size_t most_likely_index(std::span<const Mode> modes) {
    if (modes.empty()) throw InvalidInput("cannot select the most likely mode of an empty mode list");
    std::size_t best = 0;
    for (std::size_t k = 1; k < modes.size(); ++k) {
        if (modes[k].confidence > modes[best].confidence) best = k;
    }
    return best;
}

MostLikely select_most_likely(const ModelOutput& output) {
    const auto k = most_likely_index(output.modes);
    return {output.model_id, output.modes[k].trajectory, output.modes[k].confidence};
}

double distance(const Waypoint& a, const Waypoint& b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

void require_same_horizon(const Trajectory& a, const Trajectory& b, const std::string& context) {
    if (a.horizon() != b.horizon()) {
        throw HorizonMismatch(context + ": horizon " + std::to_string(a.horizon()) + " vs " +
                              std::to_string(b.horizon()));
    }
}

double ade(const Trajectory& pred, const Trajectory& gt) {
    require_same_horizon(pred, gt, "ade");
    double sum = 0.0;
    for (std::size_t t = 0; t < pred.horizon(); ++t) sum += distance(pred[t], gt[t]);
    return sum / static_cast<double>(pred.horizon());
}

double fde(const Trajectory& pred, const Trajectory& gt) {
    require_same_horizon(pred, gt, "fde");
    return distance(pred.back(), gt.back());
}

}  // namespace trajfuse::core
