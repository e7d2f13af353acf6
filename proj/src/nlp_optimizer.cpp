#include "tdcr/nlp_optimizer.hpp"

#include "tdcr/errors.hpp"
#include "tdcr/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tdcr {

void NlpConfig::validate() const {
    if (max_iterations <= 0 || !(kkt_tolerance > 0.0) || !(constraint_tolerance > 0.0) ||
        !(finite_difference_step > 0.0))
        throw DomainError("NLP configuration values must be positive");
}

Eigen::VectorXd finite_diff_gradient(const ScalarFn& f, const Eigen::VectorXd& x, double h) {
    if (!(h > 0.0)) throw DomainError("finite difference step must be positive");
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        xp[k] = x[k] + h;
        const double fp = f(xp);
        xp[k] = x[k] - h;
        const double fm = f(xp);
        xp[k] = x[k];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericalError("objective is not finite at a finite difference point");
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

struct Point {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd ce;
    Eigen::VectorXd ci;
    bool finite = true;

    double violation() const {
        double v = inf_norm(ce);
        for (Eigen::Index i = 0; i < ci.size(); ++i) v = std::max(v, -ci[i]);
        return v;
    }
};

class Evaluator {
public:
    Evaluator(const NlpProblem& p, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double h)
        : p_(p), lo_(lo), hi_(hi), h_(h) {}

    Point at(const Eigen::VectorXd& x) const {
        Point pt;
        pt.x = x;
        pt.f = p_.objective(x);
        pt.ce = p_.equality_constraints ? p_.equality_constraints(x) : Eigen::VectorXd();
        pt.ci = p_.inequality_constraints ? p_.inequality_constraints(x) : Eigen::VectorXd();
        pt.finite = std::isfinite(pt.f) && pt.ce.allFinite() && pt.ci.allFinite();
        return pt;
    }

    // Same as at() but never throws from callbacks; failures mark the point non-finite.
    Point try_at(const Eigen::VectorXd& x) const {
        try {
            return at(x);
        } catch (const std::exception&) {
            Point pt;
            pt.x = x;
            pt.finite = false;
            return pt;
        }
    }

    Eigen::VectorXd gradient(const Point& pt) const {
        if (p_.objective_gradient) return p_.objective_gradient(pt.x);
        Eigen::VectorXd g(pt.x.size());
        derivatives(pt, [&](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, p_.objective(x)); },
                    Eigen::VectorXd::Constant(1, pt.f), [&](Eigen::Index k, const Eigen::VectorXd& col) { g[k] = col[0]; });
        return g;
    }

    Eigen::MatrixXd jacobian(const Point& pt, const VectorFn& fn, const Eigen::VectorXd& value) const {
        Eigen::MatrixXd J(value.size(), pt.x.size());
        if (value.size() == 0) return J;
        derivatives(pt, fn, value, [&](Eigen::Index k, const Eigen::VectorXd& col) { J.col(k) = col; });
        return J;
    }

private:
    // Central differences, switching to second-order one-sided stencils next to
    // a bound so that no evaluation leaves the box.
    template <typename Fn, typename Sink>
    void derivatives(const Point& pt, const Fn& fn, const Eigen::VectorXd& f0, Sink sink) const {
        Eigen::VectorXd xp = pt.x;
        for (Eigen::Index k = 0; k < pt.x.size(); ++k) {
            const double h = h_ * std::max(1.0, std::abs(pt.x[k]));
            const double xk = pt.x[k];
            Eigen::VectorXd col;
            if (xk + h <= hi_[k] && xk - h >= lo_[k]) {
                xp[k] = xk + h;
                const Eigen::VectorXd fp = fn(xp);
                xp[k] = xk - h;
                const Eigen::VectorXd fm = fn(xp);
                col = (fp - fm) / (2.0 * h);
            } else {
                const double dir = (xk + 2.0 * h <= hi_[k]) ? 1.0 : -1.0;
                xp[k] = xk + dir * h;
                const Eigen::VectorXd f1 = fn(xp);
                xp[k] = xk + dir * 2.0 * h;
                const Eigen::VectorXd f2 = fn(xp);
                col = dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
            }
            xp[k] = xk;
            if (!col.allFinite()) throw NumericalError("non-finite finite difference derivative");
            sink(k, col);
        }
    }

    const NlpProblem& p_;
    const Eigen::VectorXd& lo_;
    const Eigen::VectorXd& hi_;
    double h_;
};

struct Linearization {
    Eigen::VectorXd g;
    Eigen::MatrixXd JE;
    Eigen::MatrixXd JI;
};

struct Step {
    Eigen::VectorXd d;
    Eigen::VectorXd lambda_e;
    Eigen::VectorXd lambda_i;
    Eigen::VectorXd z_lower;
    Eigen::VectorXd z_upper;
};

// QP in (d, p, r, t): equality rows JE d - p + r = -ce, inequality rows JI d + t >= -ci,
// elastic variables p, r, t >= 0 with weight rho. Always feasible.
Step solve_subproblem(const Eigen::MatrixXd& B, const Point& pt, const Linearization& lin,
                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double& rho) {
    const Eigen::Index n = pt.x.size();
    const Eigen::Index ne = pt.ce.size();
    const Eigen::Index ni = pt.ci.size();
    const Eigen::Index nv = n + 2 * ne + ni;

    std::vector<Eigen::Index> lower_rows, upper_rows;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::isfinite(lo[k])) lower_rows.push_back(k);
        if (std::isfinite(hi[k])) upper_rows.push_back(k);
    }
    const Eigen::Index nb = static_cast<Eigen::Index>(lower_rows.size() + upper_rows.size());
    const Eigen::Index mi = ni + 2 * ne + ni + nb;

    QpProblem qp;
    qp.H = Eigen::MatrixXd::Zero(nv, nv);
    qp.H.topLeftCorner(n, n) = B;
    qp.A = Eigen::MatrixXd::Zero(ne, nv);
    qp.b = -pt.ce;
    if (ne > 0) {
        qp.A.leftCols(n) = lin.JE;
        qp.A.block(0, n, ne, ne) = -Eigen::MatrixXd::Identity(ne, ne);
        qp.A.block(0, n + ne, ne, ne) = Eigen::MatrixXd::Identity(ne, ne);
    }
    qp.G = Eigen::MatrixXd::Zero(mi, nv);
    qp.h = Eigen::VectorXd::Zero(mi);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < ni; ++i, ++row) {
        qp.G.row(row).head(n) = lin.JI.row(i);
        qp.G(row, n + 2 * ne + i) = 1.0;
        qp.h[row] = -pt.ci[i];
    }
    for (Eigen::Index i = 0; i < 2 * ne + ni; ++i, ++row) qp.G(row, n + i) = 1.0;
    for (Eigen::Index k : lower_rows) {
        qp.G(row, k) = 1.0;
        qp.h[row++] = lo[k] - pt.x[k];
    }
    for (Eigen::Index k : upper_rows) {
        qp.G(row, k) = -1.0;
        qp.h[row++] = pt.x[k] - hi[k];
    }

    QpResult res;
    const double violation = pt.violation();
    for (;;) {
        qp.c = Eigen::VectorXd::Constant(nv, rho);
        qp.c.head(n) = lin.g;
        res = solve_qp(qp);
        const double elastic = nv > n ? res.x.tail(nv - n).sum() : 0.0;
        if (elastic <= 1e-10 * (1.0 + violation) || rho >= 1e10) break;
        rho *= 100.0;
    }

    Step step;
    step.d = res.x.head(n);
    step.lambda_e = res.y;
    step.lambda_i = res.z.head(ni);
    step.z_lower = Eigen::VectorXd::Zero(n);
    step.z_upper = Eigen::VectorXd::Zero(n);
    Eigen::Index zrow = ni + 2 * ne + ni;
    for (Eigen::Index k : lower_rows) step.z_lower[k] = res.z[zrow++];
    for (Eigen::Index k : upper_rows) step.z_upper[k] = res.z[zrow++];
    return step;
}


double kkt_residual(const Point& pt, const Linearization& lin, const Step& step, const Eigen::VectorXd& lo,
                    const Eigen::VectorXd& hi) {
    Eigen::VectorXd stationarity = lin.g - step.z_lower + step.z_upper;
    if (pt.ce.size() > 0) stationarity -= lin.JE.transpose() * step.lambda_e;
    if (pt.ci.size() > 0) stationarity -= lin.JI.transpose() * step.lambda_i;
    double kkt = inf_norm(stationarity);
    for (Eigen::Index i = 0; i < pt.ci.size(); ++i) kkt = std::max(kkt, std::abs(step.lambda_i[i] * pt.ci[i]));
    for (Eigen::Index k = 0; k < pt.x.size(); ++k) {
        if (std::isfinite(lo[k])) kkt = std::max(kkt, std::abs(step.z_lower[k] * (pt.x[k] - lo[k])));
        if (std::isfinite(hi[k])) kkt = std::max(kkt, std::abs(step.z_upper[k] * (hi[k] - pt.x[k])));
    }
    return kkt;
}

// The QP multipliers carry the quasi-Newton step (g - J'y = -B d), which stalls
// on flat, badly scaled valleys. Least-squares multipliers for the active set the
// QP identified measure first-order optimality of the point itself.
double least_squares_kkt(const Point& pt, const Linearization& lin, const Step& step, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
    const Eigen::Index n = pt.x.size();
    const Eigen::Index ne = pt.ce.size();
    std::vector<Eigen::Index> active_i;
    for (Eigen::Index i = 0; i < pt.ci.size(); ++i) {
        if (step.lambda_i[i] > std::max(0.0, pt.ci[i] + lin.JI.row(i).dot(step.d))) active_i.push_back(i);
    }
    // A constraint counts as active when its QP multiplier dominates the gap
    // left after the step (interior-point solutions never land exactly on it).
    std::vector<std::pair<Eigen::Index, double>> active_b;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double next = pt.x[k] + step.d[k];
        if (std::isfinite(lo[k]) && step.z_lower[k] > std::max(0.0, next - lo[k]))
            active_b.emplace_back(k, 1.0);
        else if (std::isfinite(hi[k]) && step.z_upper[k] > std::max(0.0, hi[k] - next))
            active_b.emplace_back(k, -1.0);
    }
    const Eigen::Index na = ne + static_cast<Eigen::Index>(active_i.size() + active_b.size());
    if (na == 0) return inf_norm(lin.g);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, na);
    Eigen::Index col = 0;
    if (ne > 0) A.leftCols(ne) = lin.JE.transpose();
    col = ne;
    for (Eigen::Index i : active_i) A.col(col++) = lin.JI.row(i).transpose();
    for (const auto& [k, sign] : active_b) A(k, col++) = sign;
    const Eigen::VectorXd mult = A.completeOrthogonalDecomposition().solve(lin.g);
    for (Eigen::Index c = ne; c < na; ++c) {
        if (mult[c] < 0.0) return std::numeric_limits<double>::infinity();
    }
    // Complementarity against the remaining gaps.
    double kkt = inf_norm(lin.g - A * mult);
    col = ne;
    for (Eigen::Index i : active_i) kkt = std::max(kkt, std::abs(mult[col++] * pt.ci[i]));
    for (const auto& [k, sign] : active_b) {
        const double gap = sign > 0.0 ? pt.x[k] - lo[k] : hi[k] - pt.x[k];
        kkt = std::max(kkt, std::abs(mult[col++] * gap));
    }
    return kkt;
}

// Projects onto the box and snaps coordinates within a hair of a bound onto it.
Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd out = x.cwiseMax(lo).cwiseMin(hi);
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        if (std::isfinite(lo[k]) && out[k] - lo[k] <= 1e-10 * (1.0 + std::abs(lo[k]))) out[k] = lo[k];
        if (std::isfinite(hi[k]) && hi[k] - out[k] <= 1e-10 * (1.0 + std::abs(hi[k]))) out[k] = hi[k];
    }
    return out;
}

// Feasibility first, then objective.
bool better(const Point& a, const Point& b, double tol) {
    const double va = a.violation(), vb = b.violation();
    if (va <= tol && vb <= tol) return a.f < b.f;
    if (va != vb) return va < vb;
    return a.f < b.f;
}

}  // namespace

NlpSolution minimize(const NlpProblem& problem, const Eigen::VectorXd& x0, const NlpConfig& config) {
    config.validate();
    if (!problem.objective) throw DomainError("NLP problem has no objective");
    const Eigen::Index n = x0.size();
    if (n == 0) throw DomainError("NLP problem has no variables");
    Eigen::VectorXd lo = problem.lower_bounds.size() == 0 ? Eigen::VectorXd::Constant(n, -kInf) : problem.lower_bounds;
    Eigen::VectorXd hi = problem.upper_bounds.size() == 0 ? Eigen::VectorXd::Constant(n, kInf) : problem.upper_bounds;
    if (lo.size() != n || hi.size() != n) throw DomainError("bound dimensions do not match x0");
    for (Eigen::Index k = 0; k < n; ++k) {
        if (!(lo[k] <= hi[k])) throw DomainError("lower bound exceeds upper bound");
    }

    const double ctol = config.constraint_tolerance;
    const Evaluator eval(problem, lo, hi, config.finite_difference_step);

    Point pt = eval.at(clamp(x0, lo, hi));
    if (!std::isfinite(pt.f)) throw NumericalError("objective is not finite at the initial point");
    if (!pt.finite) throw NumericalError("constraints are not finite at the initial point");
    const Eigen::Index ne = pt.ce.size();
    const Eigen::Index ni = pt.ci.size();

    auto linearize = [&](const Point& p) {
        Linearization lin;
        lin.g = eval.gradient(p);
        lin.JE = eval.jacobian(p, problem.equality_constraints, p.ce);
        lin.JI = eval.jacobian(p, problem.inequality_constraints, p.ci);
        return lin;
    };
    auto merit = [&](const Point& p, const Eigen::VectorXd& we, const Eigen::VectorXd& wi) {
        if (!p.finite) return kInf;
        double phi = p.f;
        for (Eigen::Index i = 0; i < ne; ++i) phi += we[i] * std::abs(p.ce[i]);
        for (Eigen::Index i = 0; i < ni; ++i) phi += wi[i] * std::max(0.0, -p.ci[i]);
        return phi;
    };

    Linearization lin = linearize(pt);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd weight_e = Eigen::VectorXd::Zero(ne);
    Eigen::VectorXd weight_i = Eigen::VectorXd::Zero(ni);
    double rho = 1e3;
    bool just_reset = false;

    NlpSolution sol;
    Point best = pt;
    int it = 0;
    for (; it < config.max_iterations; ++it) {
        const Step step = solve_subproblem(B, pt, lin, lo, hi, rho);

        const double kkt = std::min(kkt_residual(pt, lin, step, lo, hi), least_squares_kkt(pt, lin, step, lo, hi));
        sol.kkt_residual = kkt;
        if (pt.violation() <= ctol && kkt <= config.kkt_tolerance) {
            sol.converged = true;
            break;
        }

        for (Eigen::Index i = 0; i < ne; ++i)
            weight_e[i] = std::max(std::abs(step.lambda_e[i]), 0.5 * (weight_e[i] + std::abs(step.lambda_e[i])));
        for (Eigen::Index i = 0; i < ni; ++i)
            weight_i[i] = std::max(std::abs(step.lambda_i[i]), 0.5 * (weight_i[i] + std::abs(step.lambda_i[i])));
        rho = std::max(1e3, 10.0 * std::max(inf_norm(step.lambda_e), inf_norm(step.lambda_i)));

        const Eigen::VectorXd& d = step.d;
        double slope = lin.g.dot(d);
        {
            const Eigen::VectorXd ce_lin = pt.ce + lin.JE * d;
            const Eigen::VectorXd ci_lin = pt.ci + lin.JI * d;
            for (Eigen::Index i = 0; i < ne; ++i) slope += weight_e[i] * (std::abs(ce_lin[i]) - std::abs(pt.ce[i]));
            for (Eigen::Index i = 0; i < ni; ++i)
                slope += weight_i[i] * (std::max(0.0, -ci_lin[i]) - std::max(0.0, -pt.ci[i]));
        }
        slope = std::min(slope, 0.0);

        // Merit values closer than this are indistinguishable: constraint residuals
        // carry roundoff that the multiplier weights amplify.
        const double phi0 = merit(pt, weight_e, weight_i) + 1e-12 * std::max(1.0, std::abs(pt.f));
        Point trial;
        bool accepted = false;
        double alpha = 1.0;
        for (int ls = 0; ls < 40 && !accepted; ++ls) {
            trial = eval.try_at(clamp(pt.x + alpha * d, lo, hi));
            if (merit(trial, weight_e, weight_i) <= phi0 + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            if (ls == 0 && ne > 0 && trial.finite) {
                // Second-order correction against the Maratos effect.
                const Eigen::VectorXd corr =
                    lin.JE.transpose() * (lin.JE * lin.JE.transpose()).completeOrthogonalDecomposition().solve(trial.ce);
                const Point soc = eval.try_at(clamp(pt.x + d - corr, lo, hi));
                if (merit(soc, weight_e, weight_i) <= phi0 + 1e-4 * slope) {
                    trial = soc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (just_reset) {
                sol.message = "line search failed";
                break;
            }
            B.setIdentity();
            just_reset = true;
            continue;
        }
        just_reset = false;

        const Linearization next = linearize(trial);
        const Eigen::VectorXd s = trial.x - pt.x;
        Eigen::VectorXd y = next.g - lin.g;
        if (ne > 0) y -= (next.JE - lin.JE).transpose() * step.lambda_e;
        if (ni > 0) y -= (next.JI - lin.JI).transpose() * step.lambda_i;
        const Eigen::VectorXd Bs = B * s;
        const double sBs = s.dot(Bs);
        if (sBs > 1e-300 && s.norm() > 0.0) {
            double sy = s.dot(y);
            if (sy < 0.2 * sBs) {
                const double theta = 0.8 * sBs / (sBs - sy);
                y = theta * y + (1.0 - theta) * Bs;
                sy = s.dot(y);
            }
            B += y * y.transpose() / sy - Bs * Bs.transpose() / sBs;
            B = 0.5 * (B + B.transpose());
        }

        pt = trial;
        lin = next;
        if (better(pt, best, ctol)) best = pt;
    }
    if (it >= config.max_iterations) sol.message = "iteration limit reached";

    const Point& out = sol.converged ? pt : (better(pt, best, ctol) ? pt : best);
    sol.x_star = out.x;
    sol.objective_value = out.f;
    sol.max_equality_violation = inf_norm(out.ce);
    double ineq = 0.0;
    for (Eigen::Index i = 0; i < out.ci.size(); ++i) ineq = std::max(ineq, -out.ci[i]);
    sol.max_inequality_violation = ineq;
    sol.iterations = it;
    if (sol.converged) sol.message = "converged";
    return sol;
}

}  // namespace tdcr
