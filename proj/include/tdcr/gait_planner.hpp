#pragma once

#include "tdcr/chain_geometry.hpp"
#include "tdcr/statics_solver.hpp"

#include <vector>

namespace tdcr {

enum class Handedness { left, right };

// pitch_angle is measured between the helix tangent and the helix axis:
// -> 0 degenerates to a straight line, pi/2 is a planar circle.
// phase rolls the bending plane about the base z axis.
struct HelixSpec {
    double radius = 0.02;
    double pitch_angle = 0.5;
    Handedness handedness = Handedness::right;
    double phase = 0.0;

    void validate() const;
    double curvature() const;
    double torsion() const;  // signed, positive for right-handed
};

// Ideal helix placed at the robot base. The chord from the virtual vertex one
// base-link length before the origin to the origin runs along +z, so the base
// joint bends like every other joint of a chain inscribed in the helix.
class PlacedHelix {
public:
    PlacedHelix(const HelixSpec& spec, double base_link_length);

    bool straight() const { return straight_; }
    Vec3 point(double s) const;
    Vec3 axis_direction() const { return axis_dir_; }
    Vec3 axis_point() const { return axis_point_; }
    double distance_to_axis(const Vec3& p) const;
    // Distance from p to the curve, searching arc length in [s_lo, s_hi].
    double distance(const Vec3& p, double s_lo, double s_hi) const;
    // Smallest s > s_from with |point(s) - p| = chord, or -1 when none within s_max.
    double next_at_distance(const Vec3& p, double s_from, double chord, double s_max) const;

private:
    Vec3 local(double sigma) const;  // relative to the anchor vertex, local axes

    bool straight_ = false;
    double radius_ = 0.0;
    double rise_ = 0.0;  // axial advance per radian of rotation
    double speed_ = 1.0;  // arc length per radian
    Mat3 orientation_ = Mat3::Identity();
    Vec3 axis_dir_ = Vec3::UnitZ();
    Vec3 axis_point_ = Vec3::Zero();
};

struct HelixFit {
    JointState q;
    double rms_residual = 0.0;  // meters, over frame origins 1..n
    bool converged = false;
};

// Joint angles whose frame origins best fit the helix (least squares), within
// the joint limits. Throws DomainError naming the first joint whose required
// turning angle exceeds what the joint reaches with both angles at the limit.
HelixFit helix_joint_angles(const RobotGeometry& geom, const HelixSpec& spec);

double helix_fit_rms(const RobotGeometry& geom, const JointState& q, const HelixSpec& spec);

// L_i(0) - L_i(q) per tendon; positive means the tendon must be pulled.
Eigen::VectorXd tendon_displacements_for_state(const RobotGeometry& geom, const JointState& q);

struct GaitSequence {
    std::vector<ActuationCommand> steps;
    std::vector<JointState> target_states;
    int period_steps = 0;
    double frequency_hint = 0.33;  // Hz, metadata only

    const ActuationCommand& command(int k) const { return steps[k % period_steps]; }
};

// One command per phase 2*pi*k/steps_per_cycle.
GaitSequence rolling_gait(const RobotGeometry& geom, const HelixSpec& spec, int steps_per_cycle,
                          double frequency_hint = 0.33);

struct ClearanceReport {
    double max_axis_distance = 0.0;
    double allowed = 0.0;
    bool pass = false;
};

// Frame origins must stay within (tube_id - robot_od)/2 + helix radius of the helix axis.
ClearanceReport tube_clearance(const RobotGeometry& geom, const JointState& q, const HelixSpec& spec,
                               double tube_inner_diameter, double robot_outer_diameter);

}  // namespace tdcr
