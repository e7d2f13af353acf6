#include "tdcr/gait_planner.hpp"

#include "tdcr/errors.hpp"
#include "tdcr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace tdcr {

namespace {

constexpr double kPi = std::numbers::pi;

// Axial rise per radian for the given radius and tangent-axis angle.
double rise_for(const HelixSpec& spec) {
    const double r = spec.radius / std::tan(spec.pitch_angle);
    return spec.handedness == Handedness::right ? r : -r;
}

// Turning angle between consecutive chords of parameter spacing delta.
double chord_turning_angle(double radius, double rise, double delta) {
    const double s = std::sin(0.5 * delta);
    const double chord2 = 4.0 * radius * radius * s * s + rise * rise * delta * delta;
    const double c = (4.0 * radius * radius * s * s * std::cos(delta) + rise * rise * delta * delta) / chord2;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

// Parameter spacing whose chord has the given length; -1 when unreachable.
double spacing_for_chord(double radius, double rise, double chord) {
    auto len = [&](double d) {
        const double s = std::sin(0.5 * d);
        return std::sqrt(4.0 * radius * radius * s * s + rise * rise * d * d);
    };
    double hi = 1e-6;
    while (len(hi) < chord) {
        hi *= 2.0;
        if (rise == 0.0 && hi >= kPi) {
            if (len(kPi) < chord) return -1.0;
            hi = kPi;
            break;
        }
        if (hi > 1e6) return -1.0;
    }
    double lo = 0.0;
    for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (len(mid) < chord ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void HelixSpec::validate() const {
    if (!(radius > 0.0)) throw DomainError("helix radius must be positive");
    if (!(pitch_angle > 0.0 && pitch_angle <= kPi / 2)) throw DomainError("helix pitch angle must lie in (0, pi/2]");
    if (!std::isfinite(phase)) throw DomainError("helix phase must be finite");
}

double HelixSpec::curvature() const {
    if (std::isinf(radius)) return 0.0;
    const double s = std::sin(pitch_angle);
    return s * s / radius;
}

double HelixSpec::torsion() const {
    if (std::isinf(radius)) return 0.0;
    const double t = std::sin(pitch_angle) * std::cos(pitch_angle) / radius;
    return handedness == Handedness::right ? t : -t;
}

PlacedHelix::PlacedHelix(const HelixSpec& spec, double base_link_length) {
    spec.validate();
    if (!(base_link_length > 0.0)) throw DomainError("base link length must be positive");
    radius_ = spec.radius;
    rise_ = std::isinf(radius_) ? 0.0 : rise_for(spec);
    speed_ = std::hypot(radius_, rise_);
    if (std::isinf(radius_) || spec.curvature() * base_link_length < 1e-12) {
        straight_ = true;
        return;
    }
    const double delta = spacing_for_chord(radius_, rise_, base_link_length);
    if (delta < 0.0) throw DomainError("link is longer than the helix diameter");

    const Vec3 tangent = (local(0.0) - local(-delta)).normalized();
    const Vec3 next = (local(delta) - local(0.0)).normalized();
    Vec3 normal = next - tangent;
    normal -= normal.dot(tangent) * tangent;
    normal.normalize();
    const Vec3 binormal = tangent.cross(normal);

    const Vec3 bend(std::cos(spec.phase), std::sin(spec.phase), 0.0);
    Mat3 world;
    world.col(0) = Vec3::UnitZ();
    world.col(1) = bend;
    world.col(2) = Vec3::UnitZ().cross(bend);
    Mat3 body;
    body.col(0) = tangent;
    body.col(1) = normal;
    body.col(2) = binormal;
    orientation_ = world * body.transpose();
    axis_dir_ = orientation_.col(2);
    axis_point_ = orientation_ * Vec3(-radius_, 0.0, 0.0);
}

Vec3 PlacedHelix::local(double sigma) const {
    const double h = std::sin(0.5 * sigma);
    return {-2.0 * radius_ * h * h, radius_ * std::sin(sigma), rise_ * sigma};
}

Vec3 PlacedHelix::point(double s) const {
    if (straight_) return {0.0, 0.0, s};
    return orientation_ * local(s / speed_);
}

double PlacedHelix::distance_to_axis(const Vec3& p) const {
    if (straight_) return std::hypot(p.x(), p.y());
    const Vec3 d = p - axis_point_;
    return (d - d.dot(axis_dir_) * axis_dir_).norm();
}

double PlacedHelix::distance(const Vec3& p, double s_lo, double s_hi) const {
    auto f = [&](double s) { return (point(s) - p).squaredNorm(); };
    constexpr double ratio = 0.6180339887498949;
    double a = s_lo, b = s_hi;
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && (b - a) > 1e-14 * (1.0 + std::abs(a)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    return std::sqrt(std::min({fc, fd, f(s_lo), f(s_hi)}));
}

double PlacedHelix::next_at_distance(const Vec3& p, double s_from, double chord, double s_max) const {
    const double step = chord / 32.0;
    double lo = s_from;
    double hi = s_from;
    while ((point(hi) - p).norm() < chord) {
        lo = hi;
        hi += step;
        if (hi > s_max) return -1.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        ((point(mid) - p).norm() < chord ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Arc length windows used to project frame origins onto the helix.
struct FitWindows {
    std::vector<double> center;
    std::vector<double> half_width;
};

double sum_squared_distances(const RobotGeometry& geom, const JointState& q, const PlacedHelix& helix,
                             const FitWindows& win) {
    const auto frames = forward_kinematics(geom, q);
    double sum = 0.0;
    for (int j = 1; j <= geom.joint_count(); ++j) {
        const double d = helix.distance(frames[j].translation, win.center[j] - win.half_width[j],
                                        win.center[j] + win.half_width[j]);
        sum += d * d;
    }
    return sum;
}

FitWindows default_windows(const RobotGeometry& geom) {
    FitWindows w;
    w.center.push_back(0.0);
    w.half_width.push_back(0.0);
    for (double l : geom.link_lengths()) {
        w.center.push_back(w.center.back() + l);
        w.half_width.push_back(l);
    }
    return w;
}

void check_realizable(const RobotGeometry& geom, const HelixSpec& spec) {
    const double radius = spec.radius;
    const double rise = rise_for(spec);
    const auto& links = geom.link_lengths();
    // Largest turn a universal joint reaches with both angles at the limit.
    const double c = std::cos(geom.joint_limit());
    const double max_turn = std::acos(c * c);
    for (int j = 0; j < geom.joint_count(); ++j) {
        const double chord = j == 0 ? links[0] : 0.5 * (links[j - 1] + links[j]);
        const double delta = spacing_for_chord(radius, rise, chord);
        const double turn = delta < 0.0 ? kPi : chord_turning_angle(radius, rise, delta);
        if (turn > max_turn) {
            throw DomainError("helix curvature not realizable at joint " + std::to_string(j + 1) +
                              ": needs a turn of " + std::to_string(turn) + " rad");
        }
    }
}

}  // namespace

double helix_fit_rms(const RobotGeometry& geom, const JointState& q, const HelixSpec& spec) {
    const PlacedHelix helix(spec, geom.link_lengths().front());
    const double sum = sum_squared_distances(geom, q, helix, default_windows(geom));
    return std::sqrt(sum / geom.joint_count());
}

HelixFit helix_joint_angles(const RobotGeometry& geom, const HelixSpec& spec) {
    spec.validate();
    const int n = geom.joint_count();
    const PlacedHelix helix(spec, geom.link_lengths().front());
    HelixFit fit;
    if (helix.straight()) {
        fit.q = JointState::zero(n);
        fit.converged = true;
        return fit;
    }
    check_realizable(geom, spec);

    // Greedy inscription: each link reaches for the next point on the helix.
    const double limit = geom.joint_limit();
    Eigen::VectorXd q0(2 * n);
    FitWindows win;
    win.center.push_back(0.0);
    win.half_width.push_back(0.0);
    Pose frame;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        const double l = geom.link_lengths()[j];
        double s_next = helix.next_at_distance(frame.translation, s, l, s + 4.0 * l);
        if (s_next < 0.0) s_next = s + l;
        const Vec3 u = frame.rotation.transpose() * (helix.point(s_next) - frame.translation) / l;
        const double beta = std::clamp(std::asin(std::clamp(u.x(), -1.0, 1.0)), -limit, limit);
        const double alpha = std::clamp(std::atan2(-u.y(), u.z()), -limit, limit);
        q0[2 * j] = alpha;
        q0[2 * j + 1] = beta;
        frame = frame * joint_transform(alpha, beta, l);
        win.center.push_back(s_next);
        win.half_width.push_back(0.5 * l);
        s = s_next;
    }

    const double scale = 1.0 / (geom.total_length() * geom.total_length());
    NlpProblem problem;
    problem.objective = [&](const Eigen::VectorXd& x) {
        return scale * sum_squared_distances(geom, JointState(x), helix, win);
    };
    problem.lower_bounds = Eigen::VectorXd::Constant(2 * n, -limit);
    problem.upper_bounds = Eigen::VectorXd::Constant(2 * n, limit);
    NlpConfig cfg;
    cfg.kkt_tolerance = 1e-10;
    const NlpSolution sol = minimize(problem, q0, cfg);

    fit.q = JointState(sol.x_star);
    fit.converged = sol.converged;
    fit.rms_residual = std::sqrt(sol.objective_value / scale / n);
    return fit;
}

Eigen::VectorXd tendon_displacements_for_state(const RobotGeometry& geom, const JointState& q) {
    const auto straight = forward_kinematics(geom, JointState::zero(geom.joint_count()));
    const auto frames = forward_kinematics(geom, q);
    Eigen::VectorXd d(geom.tendon_count());
    for (int t = 0; t < geom.tendon_count(); ++t) {
        d[t] = tendon_length(tendon_waypoints_world(geom, straight, t)) -
               tendon_length(tendon_waypoints_world(geom, frames, t));
    }
    return d;
}

GaitSequence rolling_gait(const RobotGeometry& geom, const HelixSpec& spec, int steps_per_cycle,
                          double frequency_hint) {
    if (steps_per_cycle < 3) throw DomainError("a rolling gait needs at least 3 steps per cycle");
    if (geom.tendon_count() < 3) throw DomainError("a rolling gait needs at least 3 tendons");
    spec.validate();
    GaitSequence gait;
    gait.period_steps = steps_per_cycle;
    gait.frequency_hint = frequency_hint;
    for (int k = 0; k < steps_per_cycle; ++k) {
        HelixSpec step_spec = spec;
        step_spec.phase = spec.phase + 2.0 * kPi * k / steps_per_cycle;
        const HelixFit fit = helix_joint_angles(geom, step_spec);
        const Eigen::VectorXd d = tendon_displacements_for_state(geom, fit.q);
        gait.steps.push_back(ActuationCommand::from_displacements(std::vector<double>(d.data(), d.data() + d.size())));
        gait.target_states.push_back(fit.q);
    }
    return gait;
}

ClearanceReport tube_clearance(const RobotGeometry& geom, const JointState& q, const HelixSpec& spec,
                               double tube_inner_diameter, double robot_outer_diameter) {
    if (!(tube_inner_diameter > 0.0) || !(robot_outer_diameter > 0.0))
        throw DomainError("tube and robot diameters must be positive");
    const PlacedHelix helix(spec, geom.link_lengths().front());
    ClearanceReport report;
    report.allowed = 0.5 * (tube_inner_diameter - robot_outer_diameter) + spec.radius;
    for (const auto& f : forward_kinematics(geom, q))
        report.max_axis_distance = std::max(report.max_axis_distance, helix.distance_to_axis(f.translation));
    report.pass = report.max_axis_distance <= report.allowed;
    return report;
}

}  // namespace tdcr
