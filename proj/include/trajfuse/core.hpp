#pragma once

#include "trajfuse/errors.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trajfuse::core {

/// 2D position in a sample-local frame, meters (x east, y north).
struct Waypoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Ordered future positions sampled every `dt` seconds. The first waypoint is
/// the position at t = dt, not the current position.
class Trajectory {
public:
    Trajectory() = default;
    /// Throws InvalidInput on an empty point list, non-finite coordinates or dt <= 0.
    Trajectory(std::vector<Waypoint> points, double dt);

    [[nodiscard]] std::size_t horizon() const noexcept { return points_.size(); }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] std::span<const Waypoint> points() const noexcept { return points_; }
    [[nodiscard]] const Waypoint& operator[](std::size_t t) const { return points_[t]; }
    [[nodiscard]] const Waypoint& back() const { return points_.back(); }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    std::vector<Waypoint> points_;
    double dt_ = 0.0;
};

struct Mode {
    Trajectory trajectory;
    double confidence = 0.0;

    friend bool operator==(const Mode&, const Mode&) = default;
};

/// One model's multimodal output for one sample.
struct ModelOutput {
    std::string model_id;
    std::string sample_id;
    std::vector<Mode> modes;

    /// Throws InvalidInput / HorizonMismatch if the invariants do not hold.
    void validate() const;

    friend bool operator==(const ModelOutput&, const ModelOutput&) = default;
};

struct Sample {
    std::string sample_id;
    Trajectory ground_truth;
    std::vector<ModelOutput> outputs;

    void validate() const;
};

struct MostLikely {
    std::string model_id;
    Trajectory trajectory;
    double confidence = 0.0;
};

/// Highest-confidence mode; ties go to the lowest mode index.
[[nodiscard]] MostLikely select_most_likely(const ModelOutput& output);
/// Index variant of select_most_likely.
[[nodiscard]] std::size_t most_likely_index(std::span<const Mode> modes);

[[nodiscard]] double distance(const Waypoint& a, const Waypoint& b) noexcept;

/// Mean Euclidean displacement over the horizon, meters.
[[nodiscard]] double ade(const Trajectory& pred, const Trajectory& gt);
/// Euclidean displacement at the last waypoint, meters.
[[nodiscard]] double fde(const Trajectory& pred, const Trajectory& gt);

void require_same_horizon(const Trajectory& a, const Trajectory& b, const std::string& context);

}  // namespace trajfuse::core
