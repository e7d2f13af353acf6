#pragma once

#include "tdcr/chain_geometry.hpp"

#include <span>
#include <vector>

namespace tdcr {

// Capstan friction for one tendon. gamma = -1 when the tendon is pulled toward
// the actuator (tension decays distally), +1 when it is released.
struct FrictionParams {
    double mu = 0.0;
    int gamma = -1;

    void validate() const;
};

struct TendonPath {
    std::vector<Vec3> world_waypoints;
    std::vector<double> segment_tensions;  // one per segment, index 0 leaves the base
    std::vector<double> wrap_angles;       // one per interior way point (index k-1 for way point k)
    double base_tension = 1.0;
    bool terminal_anchored = true;
};

struct JointMoments {
    Eigen::VectorXd m;  // 2n, components about (alpha_j, beta_j) hinge axes
};

struct ActuatedTendon {
    int tendon_index = 0;
    FrictionParams friction;
    double relative_tension = 1.0;
};

// Angle in [0, pi] between (cur - prev) and (next - cur).
double wrap_angle(const Vec3& prev, const Vec3& cur, const Vec3& next);

TendonPath propagate_tension(std::span<const Vec3> world_waypoints, const FrictionParams& friction,
                             double base_tension, bool terminal_anchored = true);

// Force the tendon exerts on the robot at way point `index`.
Vec3 waypoint_net_force(const TendonPath& path, int index);

// Bending moments at every joint: each way point force contributes r x f to the
// joint of its own link and to every joint proximal to it (the distal sub-chain
// carries it), projected onto the two hinge axes of that joint.
JointMoments joint_moments(const RobotGeometry& geom, std::span<const Pose> frames, const JointState& q,
                           std::span<const ActuatedTendon> actuated);
JointMoments joint_moments(const RobotGeometry& geom, const JointState& q,
                           std::span<const ActuatedTendon> actuated);

}  // namespace tdcr
