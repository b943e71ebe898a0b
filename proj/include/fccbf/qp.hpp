#pragma once

#include "fccbf/barriers.hpp"
#include "fccbf/model.hpp"

#include <Eigen/Dense>

#include <set>
#include <string>
#include <vector>

namespace fccbf {

enum class QpStatus { optimal, relaxed, infeasible_hard };

const char* to_string(QpStatus s);
QpStatus qp_status_from_string(const std::string& s);

// Penalty on squared slacks in the relaxed problem.
inline constexpr double kSlackPenalty = 1e6;

/// min u'Hu  s.t.  rows[i].coeff . u + rows[i].offset >= 0,  u in bounds.
///
/// Rows whose tag appears in relax_tags may be softened when the hard problem
/// is infeasible. Bounds are never softened.
struct QpProblem {
    Eigen::MatrixXd hessian;
    std::vector<LinearControlConstraint> rows;
    ControlBounds bounds;
    std::set<std::string> relax_tags;

    int control_dim() const { return static_cast<int>(hessian.rows()); }
    // Rows first, then for each control j the faces u_j >= u_min,j and
    // u_j <= u_max,j. Infinite faces are still numbered but never active.
    int constraint_count() const { return static_cast<int>(rows.size()) + 2 * control_dim(); }
    bool relaxable(std::size_t row) const { return relax_tags.count(rows[row].tag) > 0; }
};

struct QpSolution {
    QpStatus status = QpStatus::optimal;
    ControlVector u;
    // One entry per row of the problem, zero for rows that were not softened.
    std::vector<double> slacks;
    double objective = 0.0;
    // Constraint indices (QpProblem numbering) with zero residual.
    std::vector<int> active_set;
    int iterations = 0;

    double slack_total() const;
};

struct SolverStats {
    long solves = 0;
    long iterations = 0;
    long optimal = 0;
    long relaxed = 0;
    long infeasible_hard = 0;
};

/// Dual active-set (Goldfarb-Idnani) solver for small dense strictly convex
/// QPs.
///
/// Holds warm-start state between calls: constraints active at the previous
/// solution are tried first when choosing which violated constraint to add.
/// One instance per simulation; not thread-safe.
class ActiveSetQp {
public:
    // Hard solve, falling back to solve_relaxed when the feasible region is
    // empty and some rows are relaxable. If that also fails the status is
    // infeasible_hard and u is the previous control clamped into the bounds.
    // Throws ConfigError on a malformed problem or non-PD hessian.
    QpSolution solve(const QpProblem& p);

    // Solves min u'Hu + M sum(delta_i^2) with relaxable rows softened to
    // a_i u + c_i + delta_i >= 0, delta_i >= 0.
    QpSolution solve_relaxed(const QpProblem& p);

    void reset();
    const SolverStats& stats() const { return stats_; }

private:
    QpSolution finish(QpSolution s);

    std::vector<int> warm_;
    ControlVector last_u_;
    SolverStats stats_;
};

// Cold-start convenience wrapper around ActiveSetQp::solve.
QpSolution solve(const QpProblem& p);

// Checks stationarity (2Hu = sum lambda_i a_i, lambda >= 0 from least squares
// on the active set), primal feasibility, and complementary slackness. For a
// relaxed solution the check runs on the softened problem.
bool kkt_check(const QpProblem& p, const QpSolution& s, double tol = 1e-7);

// Throws ConfigError unless H is square, symmetric within 1e-12, positive
// definite, and rows and bounds match its dimension.
void validate(const QpProblem& p);

}  // namespace fccbf
