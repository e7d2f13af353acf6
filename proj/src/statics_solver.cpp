#include "tdcr/statics_solver.hpp"

#include "tdcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace tdcr {

ActuationCommand ActuationCommand::from_displacements(std::vector<double> displacements) {
    ActuationCommand cmd;
    cmd.displacements = std::move(displacements);
    for (std::size_t i = 0; i < cmd.displacements.size(); ++i) {
        if (cmd.displacements[i] != 0.0) cmd.actuated.push_back(static_cast<int>(i));
    }
    return cmd;
}

void ActuationCommand::validate(int tendon_count) const {
    if (static_cast<int>(displacements.size()) != tendon_count) {
        throw DomainError("actuation has " + std::to_string(displacements.size()) + " displacements for " +
                          std::to_string(tendon_count) + " tendons");
    }
    for (std::size_t i = 0; i < actuated.size(); ++i) {
        if (actuated[i] < 0 || actuated[i] >= tendon_count)
            throw DomainError("actuated tendon index " + std::to_string(actuated[i]) + " out of range");
        if (i > 0 && actuated[i] <= actuated[i - 1]) throw DomainError("actuated set must be sorted and unique");
    }
    for (int t = 0; t < tendon_count; ++t) {
        if (!std::isfinite(displacements[t])) throw DomainError("non-finite displacement");
        const bool listed = std::binary_search(actuated.begin(), actuated.end(), t);
        if (!listed && displacements[t] != 0.0)
            throw DomainError("tendon " + std::to_string(t) + " has a command but is not actuated");
    }
}

void SolverConfig::validate() const {
    if (!(normalization_epsilon > 0.0)) throw DomainError("normalization epsilon must be positive");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("friction coefficient must be >= 0");
    if (!(stretch_compliance >= 0.0) || !std::isfinite(stretch_compliance))
        throw DomainError("stretch compliance must be >= 0");
    for (double l : initial_relative_tensions) {
        if (!(l >= 0.0)) throw DomainError("initial relative tensions must be >= 0");
    }
    nlp.validate();
}

std::vector<double> base_tensions(std::span<const double> relative_tensions) {
    std::vector<double> out;
    out.reserve(relative_tensions.size() + 1);
    out.push_back(1.0);
    out.insert(out.end(), relative_tensions.begin(), relative_tensions.end());
    return out;
}

JointMoments actuation_moments(const RobotGeometry& geom, std::span<const Pose> frames, const JointState& q,
                               const ActuationCommand& actuation, double mu, std::span<const double> tensions) {
    if (tensions.size() != actuation.actuated.size())
        throw DomainError("need one tension per actuated tendon");
    std::vector<ActuatedTendon> act;
    act.reserve(tensions.size());
    for (std::size_t i = 0; i < tensions.size(); ++i) {
        const int t = actuation.actuated[i];
        act.push_back({t, {mu, actuation.gamma(t)}, tensions[i]});
    }
    return joint_moments(geom, frames, q, act);
}

namespace {

double normalized_cost(const Eigen::VectorXd& m, const Eigen::VectorXd& q, double eps, double tension_scale) {
    const double mn = m.norm();
    const Eigen::VectorXd m_hat = mn == 0.0 ? Eigen::VectorXd::Zero(m.size()).eval() : (m / (mn + eps * tension_scale)).eval();
    const Eigen::VectorXd q_hat = q / (q.norm() + eps);
    return (m_hat - q_hat).squaredNorm();
}

double cost_with_tensions(const RobotGeometry& geom, const JointState& q, const ActuationCommand& actuation,
                          double mu, std::span<const double> tensions, double eps) {
    const auto frames = forward_kinematics(geom, q);
    const auto m = actuation_moments(geom, frames, q, actuation, mu, tensions).m;
    double scale = 0.0;
    for (double t : tensions) scale += t;
    return normalized_cost(m, q.values(), eps, scale);
}

std::vector<double> straight_lengths(const RobotGeometry& geom, const ActuationCommand& actuation) {
    const auto frames = forward_kinematics(geom, JointState::zero(geom.joint_count()));
    std::vector<double> out;
    for (int t : actuation.actuated) out.push_back(tendon_length(tendon_waypoints_world(geom, frames, t)));
    return out;
}

Eigen::VectorXd residual_with(const RobotGeometry& geom, std::span<const Pose> frames,
                              const ActuationCommand& actuation, std::span<const double> straight,
                              std::span<const double> tensions, double compliance) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(actuation.actuated.size()));
    for (std::size_t i = 0; i < actuation.actuated.size(); ++i) {
        const int t = actuation.actuated[i];
        const double shortening = straight[i] - tendon_length(tendon_waypoints_world(geom, frames, t));
        r[static_cast<Eigen::Index>(i)] = shortening - (actuation.displacements[t] - compliance * tensions[i]);
    }
    return r;
}

}  // namespace

double shape_cost(const RobotGeometry& geom, const JointState& q, const ActuationCommand& actuation, double mu,
                  std::span<const double> relative_tensions, double epsilon) {
    actuation.validate(geom.tendon_count());
    if (!actuation.actuated.empty() && relative_tensions.size() + 1 != actuation.actuated.size())
        throw DomainError("need one relative tension per actuated tendon beyond the first");
    for (double l : relative_tensions) {
        if (!(l >= 0.0)) throw DomainError("relative tensions must be >= 0");
    }
    if (!(epsilon > 0.0)) throw DomainError("normalization epsilon must be positive");
    const auto tensions =
        actuation.actuated.empty() ? std::vector<double>{} : base_tensions(relative_tensions);
    return cost_with_tensions(geom, q, actuation, mu, tensions, epsilon);
}

double shape_cost_for_tensions(const RobotGeometry& geom, const JointState& q, const ActuationCommand& actuation,
                               double mu, std::span<const double> base_tensions, double epsilon) {
    actuation.validate(geom.tendon_count());
    if (base_tensions.size() != actuation.actuated.size())
        throw DomainError("need one base tension per actuated tendon");
    if (!(epsilon > 0.0)) throw DomainError("normalization epsilon must be positive");
    return cost_with_tensions(geom, q, actuation, mu, base_tensions, epsilon);
}

Eigen::VectorXd displacement_residual(const RobotGeometry& geom, const JointState& q,
                                      const ActuationCommand& actuation, std::span<const double> tension_estimates,
                                      double stretch_compliance) {
    actuation.validate(geom.tendon_count());
    if (tension_estimates.size() != actuation.actuated.size())
        throw DomainError("need one tension estimate per actuated tendon");
    const auto straight = straight_lengths(geom, actuation);
    const auto frames = forward_kinematics(geom, q);
    return residual_with(geom, frames, actuation, straight, tension_estimates, stretch_compliance);
}

JointState default_initial_guess(const RobotGeometry& geom, const ActuationCommand& actuation, double mu) {
    const int n = geom.joint_count();
    if (actuation.actuated.empty()) return JointState::zero(n);
    const int first = actuation.actuated.front();
    const JointState straight = JointState::zero(n);
    const auto frames = forward_kinematics(geom, straight);
    const std::vector<ActuatedTendon> act{{first, {mu, actuation.gamma(first)}, 1.0}};
    const Eigen::VectorXd m = joint_moments(geom, frames, straight, act).m;
    const double peak = m.cwiseAbs().maxCoeff();
    if (peak <= 0.0) return JointState(Eigen::VectorXd::Constant(2 * n, 1e-3));
    const double sign = actuation.displacements[first] < 0.0 ? -1.0 : 1.0;
    return JointState(sign * 1e-3 * m / peak);
}

SolveResult solve_statics(const RobotGeometry& geom, const ActuationCommand& actuation, const SolverConfig& config) {
    actuation.validate(geom.tendon_count());
    config.validate();

    const int dof = geom.dof();
    const int extra = actuation.actuated.empty() ? 0 : static_cast<int>(actuation.actuated.size()) - 1;
    const double limit = geom.joint_limit();
    const double eps = config.normalization_epsilon;
    const auto straight = straight_lengths(geom, actuation);

    auto split = [&](const Eigen::VectorXd& x, JointState& q, std::vector<double>& tensions) {
        q = JointState(x.head(dof));
        tensions.clear();
        if (!actuation.actuated.empty()) {
            tensions.push_back(1.0);
            for (int i = 0; i < extra; ++i) tensions.push_back(x[dof + i]);
        }
    };

    NlpProblem problem;
    problem.objective = [&](const Eigen::VectorXd& x) {
        JointState q;
        std::vector<double> tensions;
        split(x, q, tensions);
        return cost_with_tensions(geom, q, actuation, config.mu, tensions, eps);
    };
    if (!actuation.actuated.empty()) {
        problem.equality_constraints = [&](const Eigen::VectorXd& x) {
            JointState q;
            std::vector<double> tensions;
            split(x, q, tensions);
            const auto frames = forward_kinematics(geom, q);
            return residual_with(geom, frames, actuation, straight, tensions, config.stretch_compliance);
        };
    }
    problem.lower_bounds = Eigen::VectorXd::Constant(dof + extra, -limit);
    problem.upper_bounds = Eigen::VectorXd::Constant(dof + extra, limit);
    problem.lower_bounds.tail(extra).setZero();
    problem.upper_bounds.tail(extra).setConstant(std::numeric_limits<double>::infinity());

    const JointState q0 = config.q0 ? *config.q0 : default_initial_guess(geom, actuation, config.mu);
    if (q0.size() != dof) throw DomainError("initial guess has the wrong dimension");
    Eigen::VectorXd x0(dof + extra);
    x0.head(dof) = q0.values();
    for (int i = 0; i < extra; ++i) {
        x0[dof + i] = i < static_cast<int>(config.initial_relative_tensions.size())
                          ? config.initial_relative_tensions[i]
                          : 1.0;
    }

    NlpSolution sol = minimize(problem, x0, config.nlp);

    // The normalized cost jumps at q = 0 (q/(|q| + eps) has no limit there), so a
    // local method started off the straight state never lands on it. When the
    // straight state satisfies the displacement constraints, compare it directly,
    // optimizing only the relative tensions.
    if (!actuation.actuated.empty()) {
        const double ctol = config.nlp.constraint_tolerance;
        const double c = config.stretch_compliance;
        const double d_ref = actuation.displacements[actuation.actuated.front()];
        bool straight_feasible = std::abs(d_ref - c) <= ctol;
        Eigen::VectorXd lam_lo = Eigen::VectorXd::Zero(extra);
        Eigen::VectorXd lam_hi = Eigen::VectorXd::Constant(extra, std::numeric_limits<double>::infinity());
        for (int i = 0; i < extra && straight_feasible; ++i) {
            const double d = actuation.displacements[actuation.actuated[i + 1]];
            if (c > 0.0) {
                lam_lo[i] = lam_hi[i] = std::max(0.0, d / c);
                straight_feasible = d >= -ctol;
            } else {
                straight_feasible = std::abs(d) <= ctol;
            }
        }
        if (straight_feasible) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(dof + extra);
            double straight_cost = 0.0;
            bool straight_converged = true;
            if (extra > 0) {
                // Moments at q = 0 are linear in the tensions: pick the non-negative
                // relative tensions that cancel them as far as possible.
                const JointState zero = JointState::zero(geom.joint_count());
                const auto frames = forward_kinematics(geom, zero);
                Eigen::MatrixXd columns(dof, extra + 1);
                for (int i = 0; i <= extra; ++i) {
                    const int t = actuation.actuated[i];
                    const std::vector<ActuatedTendon> one{{t, {config.mu, actuation.gamma(t)}, 1.0}};
                    columns.col(i) = joint_moments(geom, frames, zero, one).m;
                }
                const double scale = 1.0 / std::max(columns.squaredNorm(), 1e-300);
                NlpProblem sub;
                sub.objective = [&](const Eigen::VectorXd& lam) {
                    return scale * (columns.col(0) + columns.rightCols(extra) * lam).squaredNorm();
                };
                sub.lower_bounds = lam_lo;
                sub.upper_bounds = lam_hi;
                const NlpSolution lam = minimize(sub, x0.tail(extra).cwiseMax(lam_lo).cwiseMin(lam_hi), config.nlp);
                x.tail(extra) = lam.x_star;
                straight_cost = problem.objective(x);
                straight_converged = lam.converged;
            } else {
                straight_cost = problem.objective(x);
            }
            const Eigen::VectorXd ce = problem.equality_constraints(x);
            if (straight_converged && ce.cwiseAbs().maxCoeff() <= ctol &&
                (!sol.converged || straight_cost <= sol.objective_value)) {
                sol.x_star = x;
                sol.objective_value = straight_cost;
                sol.converged = true;
                sol.kkt_residual = 0.0;
                sol.message = "converged at the straight state";
            }
        }
    }

    SolveResult out;
    std::vector<double> tensions;
    split(sol.x_star, out.q_star, tensions);
    out.relative_tensions.assign(sol.x_star.data() + dof, sol.x_star.data() + dof + extra);
    out.cost = sol.objective_value;
    out.displacement_residuals =
        residual_with(geom, forward_kinematics(geom, out.q_star), actuation, straight, tensions,
                      config.stretch_compliance);
    out.converged = sol.converged;
    out.iterations = sol.iterations;
    out.kkt_residual = sol.kkt_residual;
    out.message = sol.message;
    return out;
}

SolveResult solve_baseline_frictionless(const RobotGeometry& geom, const ActuationCommand& actuation,
                                        SolverConfig config) {
    config.mu = 0.0;
    return solve_statics(geom, actuation, config);
}

int GridRange::count() const {
    if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
        throw DomainError("grid range needs lo <= hi and a positive step");
    return static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

std::vector<double> dataset_tip_errors(const RobotGeometry& geom, std::span<const CalibrationSample> dataset,
                                       const SolverConfig& config) {
    std::vector<double> errors;
    errors.reserve(dataset.size());
    for (const auto& sample : dataset) {
        const SolveResult res = solve_statics(geom, sample.command, config);
        const auto origins = frame_origins(forward_kinematics(geom, res.q_star));
        errors.push_back(tip_error(origins, sample.truth, geom.total_length()).error_m);
    }
    return errors;
}

CalibrationResult calibrate(const RobotGeometry& geom, std::span<const CalibrationSample> dataset,
                            const GridRange& mu_range, const GridRange& stretch_range,
                            const SolverConfig& base_config) {
    if (dataset.empty()) throw DomainError("calibration dataset is empty");
    if (mu_range.lo < 0.0 || stretch_range.lo < 0.0) throw DomainError("calibration ranges must be non-negative");
    const int n_mu = mu_range.count();
    const int n_st = stretch_range.count();

    std::map<std::pair<int, int>, double> cache;
    auto mean_error = [&](int i, int j) {
        const auto key = std::make_pair(i, j);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
        SolverConfig cfg = base_config;
        cfg.mu = mu_range.at(i);
        cfg.stretch_compliance = stretch_range.at(j);
        const auto errs = dataset_tip_errors(geom, dataset, cfg);
        double sum = 0.0;
        for (double e : errs) sum += e;
        return cache[key] = sum / static_cast<double>(errs.size());
    };

    std::pair<int, int> best{0, 0};
    double best_err = mean_error(0, 0);
    auto consider = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= n_mu || j >= n_st) return;
        const double e = mean_error(i, j);
        if (e < best_err || (e == best_err && std::make_pair(i, j) < best)) {
            best_err = e;
            best = {i, j};
        }
    };

    const int stride_mu = std::max(1, (n_mu - 1 + 5) / 6);
    const int stride_st = std::max(1, (n_st - 1 + 5) / 6);
    auto coarse_axis = [](int count, int stride) {
        std::vector<int> idx;
        for (int i = 0; i < count; i += stride) idx.push_back(i);
        if (idx.back() != count - 1) idx.push_back(count - 1);
        return idx;
    };
    for (int i : coarse_axis(n_mu, stride_mu))
        for (int j : coarse_axis(n_st, stride_st)) consider(i, j);

    // Fine pass over the coarse cell around the winner, then lattice descent.
    const auto center = best;
    for (int i = center.first - stride_mu; i <= center.first + stride_mu; ++i)
        for (int j = center.second - stride_st; j <= center.second + stride_st; ++j) consider(i, j);
    for (;;) {
        const auto before = best;
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) consider(before.first + di, before.second + dj);
        if (best == before) break;
    }

    CalibrationResult out;
    out.mu = mu_range.at(best.first);
    out.stretch_compliance = stretch_range.at(best.second);
    out.mean_tip_error = best_err;
    SolverConfig cfg = base_config;
    cfg.mu = out.mu;
    cfg.stretch_compliance = out.stretch_compliance;
    out.tip_errors = dataset_tip_errors(geom, dataset, cfg);
    out.evaluated_points = static_cast<int>(cache.size());
    return out;
}

}  // namespace tdcr
