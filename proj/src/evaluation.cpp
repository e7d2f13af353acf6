#include "tdcr/evaluation.hpp"

#include "tdcr/errors.hpp"

namespace tdcr {

void GroundTruthShape::validate() const {
    if (s.empty()) throw DomainError("ground truth shape is empty");
    if (s.size() != points.size()) throw DomainError("ground truth arc lengths and points differ in count");
    if (s.front() != 0.0) throw DomainError("ground truth arc length must start at 0");
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!(s[i] >= s[i - 1])) throw DomainError("ground truth arc length must be non-decreasing");
    }
}

TipError tip_error(std::span<const Vec3> estimated, const GroundTruthShape& truth, double robot_length) {
    if (estimated.empty()) throw DomainError("estimated shape is empty");
    truth.validate();
    if (!(robot_length > 0.0)) throw DomainError("robot length must be positive");
    std::size_t tip = 0;
    for (std::size_t i = 1; i < truth.s.size(); ++i) {
        if (truth.s[i] >= truth.s[tip]) tip = i;
    }
    TipError out;
    out.error_m = (estimated.back() - truth.points[tip]).norm();
    out.error_fraction = out.error_m / robot_length;
    return out;
}

std::vector<Vec3> frame_origins(std::span<const Pose> frames) {
    std::vector<Vec3> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.translation);
    return out;
}

GroundTruthShape shape_from_state(const RobotGeometry& geom, const JointState& q) {
    const auto frames = forward_kinematics(geom, q);
    GroundTruthShape shape;
    shape.points = frame_origins(frames);
    shape.s.push_back(0.0);
    for (double l : geom.link_lengths()) shape.s.push_back(shape.s.back() + l);
    return shape;
}

}  // namespace tdcr
