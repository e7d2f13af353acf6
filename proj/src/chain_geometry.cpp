#include "tdcr/chain_geometry.hpp"

#include "tdcr/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tdcr {

double Pose::orthonormality_residual() const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

RobotGeometry::RobotGeometry(std::vector<double> link_lengths, double joint_limit,
                             std::vector<TendonRouting> tendons)
    : link_lengths_(std::move(link_lengths)), joint_limit_(joint_limit), tendons_(std::move(tendons)) {
    if (link_lengths_.empty()) throw InvariantError("robot needs at least one joint");
    for (std::size_t j = 0; j < link_lengths_.size(); ++j) {
        if (!(link_lengths_[j] > 0.0) || !std::isfinite(link_lengths_[j]))
            throw InvariantError("link " + std::to_string(j) + " has non-positive length");
    }
    if (!(joint_limit_ > 0.0) || joint_limit_ > std::numbers::pi / 2)
        throw InvariantError("joint limit must lie in (0, pi/2]");
    if (tendons_.empty()) throw InvariantError("robot needs at least one tendon");
    const std::size_t expected = 2 * link_lengths_.size() + 1;
    for (std::size_t i = 0; i < tendons_.size(); ++i) {
        const auto& wp = tendons_[i].relative_waypoints;
        if (wp.size() != expected) {
            throw DimensionError("tendon " + std::to_string(i) + " has " + std::to_string(wp.size()) +
                                 " way points, expected " + std::to_string(expected));
        }
        for (const auto& p : wp) {
            if (!p.allFinite())
                throw InvariantError("tendon " + std::to_string(i) + " has a non-finite way point");
        }
    }
}

double RobotGeometry::total_length() const {
    double sum = 0.0;
    for (double l : link_lengths_) sum += l;
    return sum;
}

JointState::JointState(Eigen::VectorXd q) : q_(std::move(q)) {
    if (q_.size() % 2 != 0) throw DomainError("joint state must have an even number of angles");
}

Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << 1, 0, 0, 0, c, -s, 0, s, c;
    return r;
}

Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

Pose joint_transform(double alpha, double beta, double link_length) {
    constexpr double half_pi = std::numbers::pi / 2;
    if (!(std::abs(alpha) <= half_pi) || !(std::abs(beta) <= half_pi))
        throw DomainError("universal joint angle outside [-pi/2, pi/2]");
    if (!(link_length > 0.0)) throw DomainError("link length must be positive");
    Pose p;
    p.rotation = rot_x(alpha) * rot_y(beta);
    p.translation = p.rotation.col(2) * link_length;
    return p;
}

std::vector<Pose> forward_kinematics(const RobotGeometry& geom, const JointState& q) {
    const int n = geom.joint_count();
    if (q.size() != 2 * n) {
        throw DomainError("joint state has " + std::to_string(q.size()) + " angles, robot needs " +
                          std::to_string(2 * n));
    }
    const double limit = geom.joint_limit();
    std::vector<Pose> frames;
    frames.reserve(n + 1);
    frames.push_back(Pose::identity());
    for (int j = 0; j < n; ++j) {
        if (!(std::abs(q.alpha(j)) <= limit) || !(std::abs(q.beta(j)) <= limit))
            throw DomainError("joint " + std::to_string(j + 1) + " exceeds the joint limit");
        frames.push_back(frames.back() * joint_transform(q.alpha(j), q.beta(j), geom.link_lengths()[j]));
    }
    return frames;
}

Pose link_frame(std::span<const Pose> frames, int link) {
    return {frames[link].rotation, frames[link - 1].translation};
}

std::pair<Vec3, Vec3> joint_axes(std::span<const Pose> frames, const JointState& q, int joint) {
    const Mat3& proximal = frames[joint - 1].rotation;
    const Mat3 after_alpha = proximal * rot_x(q.alpha(joint - 1));
    return {proximal.col(0), after_alpha.col(1)};
}

std::vector<Vec3> tendon_waypoints_world(const RobotGeometry& geom, std::span<const Pose> frames,
                                         int tendon_index) {
    if (tendon_index < 0 || tendon_index >= geom.tendon_count())
        throw DomainError("tendon index " + std::to_string(tendon_index) + " out of range");
    if (static_cast<int>(frames.size()) != geom.joint_count() + 1)
        throw DomainError("frame count does not match the robot");
    const auto& rel = geom.tendons()[tendon_index].relative_waypoints;
    std::vector<Vec3> world(rel.size());
    world[0] = frames[0].apply(rel[0]);
    for (std::size_t k = 1; k < rel.size(); ++k) {
        const int link = waypoint_link(static_cast<int>(k));
        world[k] = frames[link - 1].translation + frames[link].rotation * rel[k];
    }
    return world;
}

std::vector<Vec3> tendon_waypoints_world(const RobotGeometry& geom, const JointState& q,
                                         int tendon_index) {
    const auto frames = forward_kinematics(geom, q);
    return tendon_waypoints_world(geom, frames, tendon_index);
}

double tendon_length(std::span<const Vec3> waypoints) {
    if (waypoints.size() < 2) throw DomainError("tendon length needs at least two way points");
    double length = 0.0;
    for (std::size_t k = 1; k < waypoints.size(); ++k) length += (waypoints[k] - waypoints[k - 1]).norm();
    return length;
}

TendonRouting helical_routing(std::span<const double> link_lengths, double radius, double start_angle,
                              double angular_rate, double inset) {
    if (link_lengths.empty()) throw DomainError("routing needs at least one link");
    if (!(inset > 0.0 && inset < 0.5)) throw DomainError("groove inset must lie in (0, 0.5)");
    auto at = [&](double s, double z) {
        const double theta = start_angle + angular_rate * s;
        return Vec3(radius * std::cos(theta), radius * std::sin(theta), z);
    };
    TendonRouting routing;
    const double base_z = -inset * link_lengths[0];
    routing.relative_waypoints.push_back(at(base_z, base_z));
    double s0 = 0.0;
    for (double l : link_lengths) {
        const double z_in = inset * l;
        const double z_out = (1.0 - inset) * l;
        routing.relative_waypoints.push_back(at(s0 + z_in, z_in));
        routing.relative_waypoints.push_back(at(s0 + z_out, z_out));
        s0 += l;
    }
    routing.terminal_anchored = true;
    return routing;
}

}  // namespace tdcr
