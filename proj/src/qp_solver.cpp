#include "tdcr/qp_solver.hpp"

#include "tdcr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tdcr {

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return alpha;
}

// Row-wise relative test so that large penalty weights in c do not loosen the
// tolerance on the other rows.
bool within(const Eigen::VectorXd& r, const Eigen::VectorXd& ref, double tol) {
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (!(std::abs(r[i]) <= tol * (1.0 + std::abs(ref[i])))) return false;
    }
    return true;
}

// min(s_i, z_i) <= tol for every pair
bool complementary(const Eigen::VectorXd& s, const Eigen::VectorXd& z, double tol) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (!(s[i] * z[i] <= tol * std::max({1.0, s[i], z[i]}))) return false;
    }
    return true;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, double tolerance, int max_iterations) {
    const Eigen::Index n = qp.c.size();
    const Eigen::Index me = qp.b.size();
    const Eigen::Index mi = qp.h.size();
    if (qp.H.rows() != n || qp.H.cols() != n || qp.A.rows() != me || (me > 0 && qp.A.cols() != n) ||
        qp.G.rows() != mi || (mi > 0 && qp.G.cols() != n))
        throw DomainError("inconsistent QP dimensions");

    QpResult res;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
    Eigen::VectorXd s = Eigen::VectorXd::Ones(mi);
    Eigen::VectorXd z = Eigen::VectorXd::Ones(mi);
    if (mi > 0) s = (qp.G * x - qp.h).cwiseMax(1.0);

    constexpr double reg = 1e-13;

    const Eigen::Index dim = n + me;
    Eigen::MatrixXd kkt(dim, dim);

    for (int it = 0; it < max_iterations; ++it) {
        res.iterations = it;
        const Eigen::VectorXd rd = qp.H * x + qp.c - qp.A.transpose() * y - qp.G.transpose() * z;
        const Eigen::VectorXd ra = qp.A * x - qp.b;
        const Eigen::VectorXd rg = qp.G * x - s - qp.h;
        const double mu = mi > 0 ? s.dot(z) / static_cast<double>(mi) : 0.0;

        if (within(rd, qp.c, tolerance) && within(ra, qp.b, tolerance) && within(rg, qp.h, tolerance) &&
            complementary(s, z, tolerance)) {
            res.converged = true;
            break;
        }

        const Eigen::VectorXd w = z.cwiseQuotient(s);
        kkt.setZero();
        kkt.topLeftCorner(n, n) = qp.H + qp.G.transpose() * w.asDiagonal() * qp.G;
        kkt.topLeftCorner(n, n).diagonal().array() += reg;
        if (me > 0) {
            kkt.topRightCorner(n, me) = qp.A.transpose();
            kkt.bottomLeftCorner(me, n) = qp.A;
            kkt.bottomRightCorner(me, me).diagonal().array() = -reg;
        }
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

        auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                          Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
            Eigen::VectorXd rhs(dim);
            rhs.head(n) = -rd - qp.G.transpose() * (rc + z.cwiseProduct(rg)).cwiseQuotient(s);
            if (me > 0) rhs.tail(me) = -ra;
            const Eigen::VectorXd sol = lu.solve(rhs);
            dx = sol.head(n);
            dy = -sol.tail(me);
            ds = qp.G * dx + rg;
            dz = -(rc + z.cwiseProduct(ds)).cwiseQuotient(s);
        };

        Eigen::VectorXd dx, dy, ds, dz;
        const Eigen::VectorXd sz = s.cwiseProduct(z);
        newton(sz, dx, dy, ds, dz);

        if (mi > 0) {
            const double a_p = max_step(s, ds);
            const double a_d = max_step(z, dz);
            const double mu_aff = (s + a_p * ds).dot(z + a_d * dz) / static_cast<double>(mi);
            const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
            const Eigen::VectorXd rc = sz + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(mi, sigma * mu);
            newton(rc, dx, dy, ds, dz);
        }

        const double a = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(z, dz)));
        x += a * dx;
        s += a * ds;
        y += a * dy;
        z += a * dz;
        if (!x.allFinite() || !y.allFinite() || !z.allFinite()) break;
    }
    res.x = x;
    res.y = y;
    res.z = z;
    return res;
}

}  // namespace tdcr
