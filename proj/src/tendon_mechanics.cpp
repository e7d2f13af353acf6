#include "tdcr/tendon_mechanics.hpp"

#include "tdcr/errors.hpp"

#include <cmath>
#include <string>

namespace tdcr {

namespace {

constexpr double kMinSegment = 1e-12;

Vec3 unit_segment(const Vec3& from, const Vec3& to) {
    const Vec3 d = to - from;
    const double len = d.norm();
    if (!(len > kMinSegment)) throw DomainError("coincident tendon way points");
    return d / len;
}

}  // namespace

void FrictionParams::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("friction coefficient must be >= 0");
    if (gamma != 1 && gamma != -1) throw DomainError("gamma must be +1 or -1");
}

double wrap_angle(const Vec3& prev, const Vec3& cur, const Vec3& next) {
    const Vec3 a = unit_segment(prev, cur);
    const Vec3 b = unit_segment(cur, next);
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

TendonPath propagate_tension(std::span<const Vec3> world_waypoints, const FrictionParams& friction,
                             double base_tension, bool terminal_anchored) {
    friction.validate();
    if (world_waypoints.size() < 2) throw DomainError("tendon path needs at least two way points");
    if (!(base_tension > 0.0) || !std::isfinite(base_tension))
        throw DomainError("base tension must be positive");

    TendonPath path;
    path.world_waypoints.assign(world_waypoints.begin(), world_waypoints.end());
    path.base_tension = base_tension;
    path.terminal_anchored = terminal_anchored;

    const std::size_t segments = world_waypoints.size() - 1;
    path.segment_tensions.resize(segments);
    path.wrap_angles.resize(segments - 1);
    path.segment_tensions[0] = base_tension;
    if (segments == 1) unit_segment(world_waypoints[0], world_waypoints[1]);
    for (std::size_t k = 1; k < segments; ++k) {
        const double theta = wrap_angle(world_waypoints[k - 1], world_waypoints[k], world_waypoints[k + 1]);
        path.wrap_angles[k - 1] = theta;
        path.segment_tensions[k] = path.segment_tensions[k - 1] * std::exp(friction.gamma * friction.mu * theta);
    }
    return path;
}

Vec3 waypoint_net_force(const TendonPath& path, int index) {
    const int last = static_cast<int>(path.world_waypoints.size()) - 1;
    const auto& p = path.world_waypoints;
    if (index <= 0 || index > last)
        throw DomainError("way point " + std::to_string(index) + " carries no force on the robot");
    const Vec3 u_in = unit_segment(p[index - 1], p[index]);
    const double f_in = path.segment_tensions[index - 1];
    if (index == last) {
        if (!path.terminal_anchored) throw DomainError("terminal way point is not anchored");
        return -f_in * u_in;
    }
    const Vec3 u_out = unit_segment(p[index], p[index + 1]);
    return path.segment_tensions[index] * u_out - f_in * u_in;
}

JointMoments joint_moments(const RobotGeometry& geom, std::span<const Pose> frames, const JointState& q,
                           std::span<const ActuatedTendon> actuated) {
    const int n = geom.joint_count();
    // Per link: sum of forces and sum of moments about the base origin.
    std::vector<Vec3> link_force(n + 1, Vec3::Zero());
    std::vector<Vec3> link_moment(n + 1, Vec3::Zero());

    for (const auto& act : actuated) {
        if (!(act.relative_tension >= 0.0) || !std::isfinite(act.relative_tension))
            throw DomainError("relative tension must be >= 0");
        if (act.relative_tension == 0.0) continue;
        const auto waypoints = tendon_waypoints_world(geom, frames, act.tendon_index);
        const bool anchored = geom.tendons()[act.tendon_index].terminal_anchored;
        const TendonPath path = propagate_tension(waypoints, act.friction, act.relative_tension, anchored);
        const int last = static_cast<int>(waypoints.size()) - 1;
        for (int k = 1; k <= last; ++k) {
            if (k == last && !anchored) break;
            const Vec3 f = waypoint_net_force(path, k);
            const int link = waypoint_link(k);
            link_force[link] += f;
            link_moment[link] += waypoints[k].cross(f);
        }
    }

    JointMoments out;
    out.m = Eigen::VectorXd::Zero(2 * n);
    Vec3 force = Vec3::Zero();
    Vec3 moment = Vec3::Zero();
    for (int j = n; j >= 1; --j) {
        force += link_force[j];
        moment += link_moment[j];
        const Vec3& center = frames[j - 1].translation;
        const Vec3 about_joint = moment - center.cross(force);
        const auto [ax, ay] = joint_axes(frames, q, j);
        out.m[2 * (j - 1)] = about_joint.dot(ax);
        out.m[2 * (j - 1) + 1] = about_joint.dot(ay);
    }
    return out;
}

JointMoments joint_moments(const RobotGeometry& geom, const JointState& q,
                           std::span<const ActuatedTendon> actuated) {
    const auto frames = forward_kinematics(geom, q);
    return joint_moments(geom, frames, q, actuated);
}

}  // namespace tdcr
