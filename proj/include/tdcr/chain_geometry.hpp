#pragma once

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace tdcr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform. Rotation is kept orthonormal by construction.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Pose operator*(const Pose& rhs) const {
        return {rotation * rhs.rotation, rotation * rhs.translation + translation};
    }
    // max |R^T R - I|
    double orthonormality_residual() const;
};

// Way points of one tendon. Index 0 sits on the base, indices 2j-1 and 2j
// (1-based link index j) are grooves on link j, expressed in the link frame
// whose origin is the center of joint j.
struct TendonRouting {
    std::vector<Vec3> relative_waypoints;
    bool terminal_anchored = true;
};

class RobotGeometry {
public:
    // Throws DimensionError for a routing with the wrong number of way points and
    // InvariantError for any other invalid field.
    RobotGeometry(std::vector<double> link_lengths, double joint_limit,
                  std::vector<TendonRouting> tendons);

    int joint_count() const { return static_cast<int>(link_lengths_.size()); }
    int dof() const { return 2 * joint_count(); }
    const std::vector<double>& link_lengths() const { return link_lengths_; }
    double joint_limit() const { return joint_limit_; }
    const std::vector<TendonRouting>& tendons() const { return tendons_; }
    int tendon_count() const { return static_cast<int>(tendons_.size()); }
    double total_length() const;

private:
    std::vector<double> link_lengths_;
    double joint_limit_;
    std::vector<TendonRouting> tendons_;
};

// Joint angles ordered (alpha_1, beta_1, ..., alpha_n, beta_n). No roll angle:
// the chain is torsionally rigid.
class JointState {
public:
    JointState() = default;
    explicit JointState(Eigen::VectorXd q);

    static JointState zero(int joints) { return JointState(Eigen::VectorXd::Zero(2 * joints)); }

    int joint_count() const { return static_cast<int>(q_.size() / 2); }
    int size() const { return static_cast<int>(q_.size()); }
    // 0-based joint index
    double alpha(int joint) const { return q_[2 * joint]; }
    double beta(int joint) const { return q_[2 * joint + 1]; }
    const Eigen::VectorXd& values() const { return q_; }
    double max_abs() const { return q_.size() == 0 ? 0.0 : q_.cwiseAbs().maxCoeff(); }

private:
    Eigen::VectorXd q_;
};

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

// Rotation about local x by alpha, then about the rotated y by beta, then a
// translation of link_length along the resulting z (the link direction).
Pose joint_transform(double alpha, double beta, double link_length);

// n+1 poses: base (identity) then the distal end of each link. Throws DomainError
// when q has the wrong size or leaves the joint limits.
std::vector<Pose> forward_kinematics(const RobotGeometry& geom, const JointState& q);

// Frame of link j (1-based): rotation of pose j, origin at the center of joint j.
Pose link_frame(std::span<const Pose> frames, int link);

// Hinge axes of joint j (1-based) in the base frame: the x axis of the proximal
// frame and the y axis after the alpha rotation.
std::pair<Vec3, Vec3> joint_axes(std::span<const Pose> frames, const JointState& q, int joint);

std::vector<Vec3> tendon_waypoints_world(const RobotGeometry& geom, std::span<const Pose> frames,
                                         int tendon_index);
std::vector<Vec3> tendon_waypoints_world(const RobotGeometry& geom, const JointState& q,
                                         int tendon_index);

// Link owning way point k: 0 for the base way point, otherwise (k+1)/2.
inline int waypoint_link(int k) { return (k + 1) / 2; }

double tendon_length(std::span<const Vec3> waypoints);

// Routing that winds around the backbone at constant radius. angular_rate is in
// rad per meter of straight-chain arc length; zero gives a parallel tendon.
// Grooves sit at inset*l and (1-inset)*l along each link and the base way point
// mirrors the first crossing, so every joint crossing has the same geometry.
TendonRouting helical_routing(std::span<const double> link_lengths, double radius,
                              double start_angle, double angular_rate, double inset = 0.2);
inline TendonRouting parallel_routing(std::span<const double> link_lengths, double radius,
                                      double angle, double inset = 0.2) {
    return helical_routing(link_lengths, radius, angle, 0.0, inset);
}

}  // namespace tdcr
