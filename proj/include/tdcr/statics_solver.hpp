#pragma once

#include "tdcr/chain_geometry.hpp"
#include "tdcr/evaluation.hpp"
#include "tdcr/nlp_optimizer.hpp"
#include "tdcr/tendon_mechanics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tdcr {

// Commanded pull per tendon (meters, positive shortens the free length). The
// actuated set is sorted; its first entry is the tension reference (lambda = 1).
struct ActuationCommand {
    std::vector<double> displacements;
    std::vector<int> actuated;

    // Actuated set = tendons with a nonzero command.
    static ActuationCommand from_displacements(std::vector<double> displacements);

    void validate(int tendon_count) const;
    // -1 for pulled or held tendons, +1 for released ones.
    int gamma(int tendon) const { return displacements[tendon] < 0.0 ? 1 : -1; }
};

struct SolverConfig {
    std::optional<JointState> q0;
    std::vector<double> initial_relative_tensions;  // warm start, one per actuated tendon beyond the first
    double normalization_epsilon = 1e-9;
    double mu = 0.0;
    double stretch_compliance = 0.0;  // meters per unit tension
    NlpConfig nlp;

    void validate() const;
};

struct SolveResult {
    JointState q_star;
    std::vector<double> relative_tensions;
    double cost = 0.0;
    Eigen::VectorXd displacement_residuals;
    bool converged = false;
    int iterations = 0;
    double kkt_residual = 0.0;
    std::string message;
};

// Base tensions of all actuated tendons, in actuated order: (1, lambda_2, ...).
std::vector<double> base_tensions(std::span<const double> relative_tensions);

JointMoments actuation_moments(const RobotGeometry& geom, std::span<const Pose> frames, const JointState& q,
                               const ActuationCommand& actuation, double mu, std::span<const double> tensions);

// || m/(|m| + eps*T) - q/(|q| + eps) ||^2, T = sum of base tensions. Scaling every
// tension by c leaves the value unchanged.
double shape_cost(const RobotGeometry& geom, const JointState& q, const ActuationCommand& actuation, double mu,
                  std::span<const double> relative_tensions, double epsilon = 1e-9);

// Same cost with explicit base tensions, one per actuated tendon.
double shape_cost_for_tensions(const RobotGeometry& geom, const JointState& q, const ActuationCommand& actuation,
                               double mu, std::span<const double> base_tensions, double epsilon = 1e-9);

// Per actuated tendon: [L(0) - L(q)] - [d - stretch_compliance * F_base].
// tension_estimates holds one base tension per actuated tendon.
Eigen::VectorXd displacement_residual(const RobotGeometry& geom, const JointState& q,
                                      const ActuationCommand& actuation, std::span<const double> tension_estimates,
                                      double stretch_compliance = 0.0);

// Default initial guess: 1e-3 rad toward the bending direction of the first
// actuated tendon at the straight state.
JointState default_initial_guess(const RobotGeometry& geom, const ActuationCommand& actuation, double mu);

SolveResult solve_statics(const RobotGeometry& geom, const ActuationCommand& actuation, const SolverConfig& config);
SolveResult solve_baseline_frictionless(const RobotGeometry& geom, const ActuationCommand& actuation,
                                        SolverConfig config);

struct CalibrationSample {
    ActuationCommand command;
    GroundTruthShape truth;
};

// Fine lattice lo, lo+step, ... <= hi.
struct GridRange {
    double lo = 0.0;
    double hi = 0.0;
    double step = 1.0;

    int count() const;
    double at(int i) const { return lo + step * i; }
};

struct CalibrationResult {
    double mu = 0.0;
    double stretch_compliance = 0.0;
    double mean_tip_error = 0.0;
    std::vector<double> tip_errors;  // per sample at the calibrated pair
    int evaluated_points = 0;
};

// Mean tip error over the dataset for one (mu, stretch) pair.
std::vector<double> dataset_tip_errors(const RobotGeometry& geom, std::span<const CalibrationSample> dataset,
                                       const SolverConfig& config);

// Coarse-to-fine grid search on (mu, stretch). Ties resolve to the lowest mu,
// then the lowest stretch.
CalibrationResult calibrate(const RobotGeometry& geom, std::span<const CalibrationSample> dataset,
                            const GridRange& mu_range, const GridRange& stretch_range,
                            const SolverConfig& base_config = {});

}  // namespace tdcr
