#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace tdcr {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// minimize objective(x)  s.t.  equality(x) = 0,  inequality(x) >= 0,  lower <= x <= upper.
// Empty constraint callbacks mean "no constraints of that kind"; bounds may be +-inf.
struct NlpProblem {
    ScalarFn objective;
    VectorFn equality_constraints;
    VectorFn inequality_constraints;
    Eigen::VectorXd lower_bounds;
    Eigen::VectorXd upper_bounds;
    // Optional analytic gradient; finite differences are used when empty.
    VectorFn objective_gradient;
};

struct NlpConfig {
    int max_iterations = 500;
    double kkt_tolerance = 1e-8;
    double constraint_tolerance = 1e-8;
    double finite_difference_step = 1e-6;

    void validate() const;
};

struct NlpSolution {
    Eigen::VectorXd x_star;
    double objective_value = 0.0;
    double max_equality_violation = 0.0;
    double max_inequality_violation = 0.0;
    double kkt_residual = 0.0;
    bool converged = false;
    int iterations = 0;
    std::string message;
};

// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h. Throws NumericalError
// if f is not finite at an evaluation point.
Eigen::VectorXd finite_diff_gradient(const ScalarFn& f, const Eigen::VectorXd& x, double h);

// Sequential quadratic programming with a damped BFGS Hessian, elastic (always
// feasible) QP subproblems and an l1 merit line search. Deterministic.
NlpSolution minimize(const NlpProblem& problem, const Eigen::VectorXd& x0, const NlpConfig& config = {});

}  // namespace tdcr
