#pragma once

#include "tdcr/chain_geometry.hpp"

#include <span>
#include <vector>

namespace tdcr {

// Arc-length parameterized centerline samples (FBG-style export).
struct GroundTruthShape {
    std::vector<double> s;
    std::vector<Vec3> points;

    void validate() const;
};

struct TipError {
    double error_m = 0.0;
    double error_fraction = 0.0;
};

// Distance between the last estimated frame origin and the truth sample with the
// largest arc length, also as a fraction of robot_length.
TipError tip_error(std::span<const Vec3> estimated, const GroundTruthShape& truth, double robot_length);

std::vector<Vec3> frame_origins(std::span<const Pose> frames);

// Frame origins of a chain state as a truth record, s = cumulative link length.
GroundTruthShape shape_from_state(const RobotGeometry& geom, const JointState& q);

}  // namespace tdcr
