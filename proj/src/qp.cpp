#include "fccbf/qp.hpp"

#include "fccbf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fccbf {

const char* to_string(QpStatus s)
{
    switch (s) {
    case QpStatus::optimal:
        return "optimal";
    case QpStatus::relaxed:
        return "relaxed";
    case QpStatus::infeasible_hard:
        return "infeasible-hard";
    }
    return "unknown";
}

QpStatus qp_status_from_string(const std::string& s)
{
    if (s == "optimal") {
        return QpStatus::optimal;
    }
    if (s == "relaxed") {
        return QpStatus::relaxed;
    }
    if (s == "infeasible-hard") {
        return QpStatus::infeasible_hard;
    }
    throw ConfigError("unknown qp status '" + s + "'");
}

double QpSolution::slack_total() const
{
    return std::accumulate(slacks.begin(), slacks.end(), 0.0);
}

namespace {

constexpr double kFeasTol = 1e-12;
constexpr double kDependenceTol = 1e-10;

// min 1/2 z'Gz  s.t.  C z + d >= 0. Rows of C with non-finite d are ignored.
struct DenseQp {
    Eigen::MatrixXd G;
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
};

struct DenseResult {
    bool feasible = false;
    Eigen::VectorXd z;
    std::vector<int> working;
    int iterations = 0;
};

double row_scale(const DenseQp& qp, int j)
{
    return std::max(1.0, qp.C.row(j).norm());
}

DenseResult goldfarb_idnani(const DenseQp& qp, const std::vector<int>& preferred)
{
    const int n = static_cast<int>(qp.G.rows());
    const int m = static_cast<int>(qp.C.rows());

    Eigen::LLT<Eigen::MatrixXd> llt(qp.G);
    const Eigen::MatrixXd g_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

    std::vector<char> usable(m, 1);
    for (int j = 0; j < m; ++j) {
        usable[j] = std::isfinite(qp.d[j]) ? 1 : 0;
    }
    std::vector<char> is_preferred(m, 0);
    for (int j : preferred) {
        if (j >= 0 && j < m) {
            is_preferred[j] = 1;
        }
    }

    DenseResult res;
    res.z = Eigen::VectorXd::Zero(n);
    std::vector<int> active;
    std::vector<double> lambda;

    const int max_iter = 50 * (m + n) + 100;
    auto residual = [&](int j) { return qp.C.row(j).dot(res.z) + qp.d[j]; };

    while (true) {
        // Pick the most violated constraint, preferring the warm-start set.
        int p = -1;
        double worst = 0.0;
        bool worst_preferred = false;
        for (int j = 0; j < m; ++j) {
            if (!usable[j] || std::find(active.begin(), active.end(), j) != active.end()) {
                continue;
            }
            // Tolerance relative to the terms of the residual, so rows whose
            // offset is itself tiny (a barrier near its boundary) still bind.
            const double scale = row_scale(qp, j);
            const double magnitude = std::abs(qp.d[j]) + qp.C.row(j).cwiseAbs().dot(res.z.cwiseAbs());
            const double v = residual(j) / scale;
            if (residual(j) >= -kFeasTol * magnitude) {
                continue;
            }
            const bool pref = is_preferred[j] != 0;
            if (p < 0 || (pref && !worst_preferred) || (pref == worst_preferred && v < worst)) {
                p = j;
                worst = v;
                worst_preferred = pref;
            }
        }
        if (p < 0) {
            res.feasible = true;
            res.working = active;
            return res;
        }

        const Eigen::VectorXd np = qp.C.row(p).transpose();
        const double np_norm = np.dot(g_inv * np);
        double lambda_p = 0.0;

        while (true) {
            if (++res.iterations > max_iter) {
                throw NumericalError("active-set QP exceeded iteration limit");
            }
            const int na = static_cast<int>(active.size());
            Eigen::VectorXd dir;
            Eigen::VectorXd r = Eigen::VectorXd::Zero(na);
            if (na == 0) {
                dir = g_inv * np;
            } else {
                Eigen::MatrixXd N(n, na);
                for (int i = 0; i < na; ++i) {
                    N.col(i) = qp.C.row(active[i]).transpose();
                }
                const Eigen::MatrixXd gn = g_inv * N;
                const Eigen::MatrixXd M = N.transpose() * gn;
                r = M.ldlt().solve(gn.transpose() * np);
                dir = g_inv * np - gn * r;
            }

            double t1 = std::numeric_limits<double>::infinity();
            int block = -1;
            for (int i = 0; i < na; ++i) {
                if (r[i] > 1e-14) {
                    const double ratio = lambda[i] / r[i];
                    if (ratio < t1) {
                        t1 = ratio;
                        block = i;
                    }
                }
            }

            const double curvature = dir.dot(np);
            if (curvature <= kDependenceTol * np_norm) {
                // n_p is in the span of the active normals.
                if (block < 0) {
                    return res;  // primal infeasible
                }
                for (int i = 0; i < na; ++i) {
                    lambda[i] -= t1 * r[i];
                }
                lambda_p += t1;
                active.erase(active.begin() + block);
                lambda.erase(lambda.begin() + block);
                continue;
            }

            const double t2 = -residual(p) / curvature;
            const double t = std::min(t1, t2);
            res.z += t * dir;
            for (int i = 0; i < na; ++i) {
                lambda[i] -= t * r[i];
            }
            lambda_p += t;
            if (t2 <= t1) {
                active.push_back(p);
                lambda.push_back(lambda_p);
                break;
            }
            active.erase(active.begin() + block);
            lambda.erase(lambda.begin() + block);
        }
    }
}

DenseQp hard_form(const QpProblem& p)
{
    const int q = p.control_dim();
    const int nr = static_cast<int>(p.rows.size());
    DenseQp qp;
    qp.G = 2.0 * p.hessian;
    qp.C = Eigen::MatrixXd::Zero(nr + 2 * q, q);
    qp.d = Eigen::VectorXd::Zero(nr + 2 * q);
    for (int i = 0; i < nr; ++i) {
        qp.C.row(i) = p.rows[i].coeff;
        qp.d[i] = p.rows[i].offset;
    }
    for (int j = 0; j < q; ++j) {
        qp.C(nr + 2 * j, j) = 1.0;
        qp.d[nr + 2 * j] = -p.bounds.u_min[j];
        qp.C(nr + 2 * j + 1, j) = -1.0;
        qp.d[nr + 2 * j + 1] = p.bounds.u_max[j];
    }
    return qp;
}

// Variables (u, delta) with one delta per relaxable row. Constraint order:
// the hard form's constraints (relaxable rows gain +delta), then delta >= 0.
DenseQp relaxed_form(const QpProblem& p, std::vector<int>& slack_rows)
{
    const int q = p.control_dim();
    const int nr = static_cast<int>(p.rows.size());
    slack_rows.clear();
    for (int i = 0; i < nr; ++i) {
        if (p.relaxable(i)) {
            slack_rows.push_back(i);
        }
    }
    const int ns = static_cast<int>(slack_rows.size());
    const DenseQp hard = hard_form(p);

    DenseQp qp;
    qp.G = Eigen::MatrixXd::Zero(q + ns, q + ns);
    qp.G.topLeftCorner(q, q) = hard.G;
    qp.G.bottomRightCorner(ns, ns) = 2.0 * kSlackPenalty * Eigen::MatrixXd::Identity(ns, ns);
    qp.C = Eigen::MatrixXd::Zero(hard.C.rows() + ns, q + ns);
    qp.C.topLeftCorner(hard.C.rows(), q) = hard.C;
    qp.d = Eigen::VectorXd::Zero(hard.C.rows() + ns);
    qp.d.head(hard.C.rows()) = hard.d;
    for (int s = 0; s < ns; ++s) {
        qp.C(slack_rows[s], q + s) = 1.0;
        qp.C(hard.C.rows() + s, q + s) = 1.0;
    }
    return qp;
}

std::vector<int> zero_residual_set(const DenseQp& qp, const Eigen::VectorXd& z, int count, double tol)
{
    std::vector<int> out;
    for (int j = 0; j < count; ++j) {
        if (!std::isfinite(qp.d[j])) {
            continue;
        }
        const double res = qp.C.row(j).dot(z) + qp.d[j];
        if (std::abs(res) <= tol * std::max(1.0, std::abs(qp.d[j]))) {
            out.push_back(j);
        }
    }
    return out;
}

bool dense_kkt(const DenseQp& qp, const Eigen::VectorXd& z, double tol)
{
    const Eigen::VectorXd grad = qp.G * z;
    const double scale = std::max(1.0, grad.norm());
    std::vector<int> act;
    for (int j = 0; j < qp.C.rows(); ++j) {
        if (!std::isfinite(qp.d[j])) {
            continue;
        }
        const double res = qp.C.row(j).dot(z) + qp.d[j];
        const double rtol = tol * std::max(1.0, std::abs(qp.d[j]));
        if (res < -rtol) {
            return false;
        }
        if (res <= rtol) {
            act.push_back(j);
        }
    }
    if (act.empty()) {
        return grad.norm() <= tol * scale;
    }
    Eigen::MatrixXd A(qp.G.rows(), static_cast<Eigen::Index>(act.size()));
    for (std::size_t i = 0; i < act.size(); ++i) {
        A.col(static_cast<Eigen::Index>(i)) = qp.C.row(act[i]).transpose();
    }
    const Eigen::VectorXd lambda = A.completeOrthogonalDecomposition().solve(grad);
    if ((A * lambda - grad).norm() > tol * scale) {
        return false;
    }
    return (lambda.array() >= -tol * scale).all();
}

}  // namespace

void validate(const QpProblem& p)
{
    const auto& H = p.hessian;
    if (H.rows() == 0 || H.rows() != H.cols()) {
        throw ConfigError("QP hessian must be square and non-empty");
    }
    if (!H.allFinite() || (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ConfigError("QP hessian must be symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
        throw ConfigError("QP hessian is not positive definite");
    }
    if (p.bounds.dim() != H.rows()) {
        throw ConfigError("QP bounds dimension does not match hessian");
    }
    for (const auto& row : p.rows) {
        if (row.coeff.size() != H.rows()) {
            throw ConfigError("QP row '" + row.tag + "' has wrong length");
        }
        if (!row.coeff.allFinite() || !std::isfinite(row.offset)) {
            throw ConfigError("QP row '" + row.tag + "' is not finite");
        }
    }
}

QpSolution ActiveSetQp::finish(QpSolution s)
{
    ++stats_.solves;
    stats_.iterations += s.iterations;
    switch (s.status) {
    case QpStatus::optimal:
        ++stats_.optimal;
        break;
    case QpStatus::relaxed:
        ++stats_.relaxed;
        break;
    case QpStatus::infeasible_hard:
        ++stats_.infeasible_hard;
        break;
    }
    last_u_ = s.u;
    return s;
}

QpSolution ActiveSetQp::solve(const QpProblem& p)
{
    validate(p);
    const DenseQp qp = hard_form(p);
    const DenseResult r = goldfarb_idnani(qp, warm_);
    if (r.feasible) {
        QpSolution s;
        s.status = QpStatus::optimal;
        // Round-off can leave u a few ulps outside a bound face.
        s.u = p.bounds.clamp(r.z);
        s.slacks.assign(p.rows.size(), 0.0);
        s.objective = s.u.dot(p.hessian * s.u);
        s.active_set = zero_residual_set(qp, s.u, static_cast<int>(qp.C.rows()), 1e-9);
        s.iterations = r.iterations;
        warm_ = r.working;
        return finish(std::move(s));
    }

    const bool any_relaxable = std::any_of(p.rows.begin(), p.rows.end(),
                                           [&](const auto& row) { return p.relax_tags.count(row.tag) > 0; });
    if (any_relaxable) {
        QpSolution s = solve_relaxed(p);
        s.iterations += r.iterations;
        return s;
    }

    QpSolution s;
    s.status = QpStatus::infeasible_hard;
    s.u = p.bounds.clamp(last_u_.size() == p.control_dim() ? last_u_ : ControlVector::Zero(p.control_dim()));
    s.slacks.assign(p.rows.size(), 0.0);
    s.objective = s.u.dot(p.hessian * s.u);
    s.iterations = r.iterations;
    return finish(std::move(s));
}

QpSolution ActiveSetQp::solve_relaxed(const QpProblem& p)
{
    validate(p);
    const int q = p.control_dim();
    std::vector<int> slack_rows;
    const DenseQp qp = relaxed_form(p, slack_rows);
    const DenseResult r = goldfarb_idnani(qp, warm_);

    QpSolution s;
    s.slacks.assign(p.rows.size(), 0.0);
    s.iterations = r.iterations;
    if (!r.feasible) {
        s.status = QpStatus::infeasible_hard;
        s.u = p.bounds.clamp(last_u_.size() == q ? last_u_ : ControlVector::Zero(q));
        s.objective = s.u.dot(p.hessian * s.u);
        return finish(std::move(s));
    }

    s.u = p.bounds.clamp(r.z.head(q));
    double penalty = 0.0;
    for (std::size_t i = 0; i < slack_rows.size(); ++i) {
        const double delta = std::max(0.0, r.z[q + static_cast<Eigen::Index>(i)]);
        s.slacks[slack_rows[i]] = delta;
        penalty += delta * delta;
    }
    s.objective = s.u.dot(p.hessian * s.u) + kSlackPenalty * penalty;
    s.status = s.slack_total() > 0.0 ? QpStatus::relaxed : QpStatus::optimal;

    Eigen::VectorXd z(qp.G.rows());
    z.head(q) = s.u;
    for (std::size_t i = 0; i < slack_rows.size(); ++i) {
        z[q + static_cast<Eigen::Index>(i)] = s.slacks[slack_rows[i]];
    }
    // Report active constraints in the hard numbering.
    const int hard_count = p.constraint_count();
    s.active_set = zero_residual_set(qp, z, hard_count, 1e-9);
    warm_.clear();
    for (int j : r.working) {
        if (j < hard_count) {
            warm_.push_back(j);
        }
    }
    return finish(std::move(s));
}

void ActiveSetQp::reset()
{
    warm_.clear();
    last_u_.resize(0);
    stats_ = {};
}

QpSolution solve(const QpProblem& p)
{
    ActiveSetQp solver;
    return solver.solve(p);
}

bool kkt_check(const QpProblem& p, const QpSolution& s, double tol)
{
    if (s.status == QpStatus::infeasible_hard || s.u.size() != p.control_dim()) {
        return false;
    }
    if (s.status == QpStatus::optimal) {
        return dense_kkt(hard_form(p), s.u, tol);
    }
    std::vector<int> slack_rows;
    const DenseQp qp = relaxed_form(p, slack_rows);
    Eigen::VectorXd z(qp.G.rows());
    z.head(p.control_dim()) = s.u;
    for (std::size_t i = 0; i < slack_rows.size(); ++i) {
        z[p.control_dim() + static_cast<Eigen::Index>(i)] = s.slacks.at(slack_rows[i]);
    }
    return dense_kkt(qp, z, tol);
}

}  // namespace fccbf
