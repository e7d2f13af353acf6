#pragma once

#include <Eigen/Dense>

namespace tdcr {

// Convex QP:  min 1/2 x'Hx + c'x  s.t.  A x = b,  G x >= h.
// H must be positive semidefinite and positive definite on the null space of
// the active constraints.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd c;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
};

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // equality multipliers
    Eigen::VectorXd z;  // inequality multipliers, >= 0
    bool converged = false;
    int iterations = 0;
};

// Primal-dual interior point with Mehrotra predictor-corrector.
QpResult solve_qp(const QpProblem& qp, double tolerance = 1e-12, int max_iterations = 200);

}  // namespace tdcr
