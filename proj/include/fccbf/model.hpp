#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace fccbf {

using StateVector = Eigen::VectorXd;
using ControlVector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using ScalarField = std::function<double(const StateVector&)>;
using GradientField = std::function<RowVector(const StateVector&)>;

/// Control-affine dynamics x' = f(x) + g(x) u.
///
/// Evaluators must be pure; a model is immutable after construction and can
/// be shared across threads.
class SystemModel {
public:
    using Drift = std::function<StateVector(const StateVector&)>;
    using Actuation = std::function<Eigen::MatrixXd(const StateVector&)>;

    SystemModel(std::string name, int state_dim, int control_dim, Drift drift, Actuation actuation);

    const std::string& name() const { return name_; }
    int state_dim() const { return state_dim_; }
    int control_dim() const { return control_dim_; }

    // Both throw ConfigError when x or the evaluator output has the wrong shape.
    StateVector drift(const StateVector& x) const;
    Eigen::MatrixXd actuation(const StateVector& x) const;

    StateVector derivative(const StateVector& x, const ControlVector& u) const;

private:
    void check_state(const StateVector& x) const;

    std::string name_;
    int state_dim_;
    int control_dim_;
    Drift drift_;
    Actuation actuation_;
};

/// Box U = {u : u_min <= u <= u_max}. Infinite entries are allowed.
struct ControlBounds {
    Eigen::VectorXd u_min;
    Eigen::VectorXd u_max;

    ControlBounds() = default;
    ControlBounds(Eigen::VectorXd lo, Eigen::VectorXd hi);

    static ControlBounds symmetric(const Eigen::VectorXd& magnitude);
    static ControlBounds unbounded(int control_dim);

    int dim() const { return static_cast<int>(u_min.size()); }
    bool contains(const ControlVector& u, double tol = 0.0) const;
    double max_violation(const ControlVector& u) const;
    ControlVector clamp(const ControlVector& u) const;

    // max over u in U of a . u, choosing u_max or u_min per component by the
    // sign of a. Components with a_j == 0 contribute nothing.
    double support(const RowVector& a) const;
};

/// L_f^i c and its gradient, for i >= 1.
struct LieDerivativeEvaluator {
    ScalarField value;
    GradientField gradient;
};

/// Scalar state function c(x) used as a barrier (b) or goal (h).
struct ConstraintFunction {
    std::string tag;
    ScalarField value;
    GradientField gradient;
    int relative_degree = 1;
    // Entry i-1 holds L_f^i c for i = 1..m-1. Required when m > 1.
    std::vector<LieDerivativeEvaluator> higher_lie_derivatives;

    double operator()(const StateVector& x) const { return value(x); }
};

double lie_f(const ConstraintFunction& c, const SystemModel& sys, const StateVector& x);
RowVector lie_g(const ConstraintFunction& c, const SystemModel& sys, const StateVector& x);

// Lie derivatives of L_f^order c, order in [0, m-1]. order 0 is c itself.
double lie_f_of_order(const ConstraintFunction& c, int order, const SystemModel& sys, const StateVector& x);
RowVector lie_g_of_order(const ConstraintFunction& c, int order, const SystemModel& sys,
                         const StateVector& x);

inline constexpr double kRelativeDegreeTol = 1e-9;

struct RelativeDegreeReport {
    bool consistent = false;
    // Samples where L_g L_f^{m-1} c vanished, e.g. a gradient zero such as
    // the center of a disk. These are flagged rather than treated as failure
    // when every other sample agrees.
    std::vector<std::size_t> degenerate_samples;
};

RelativeDegreeReport relative_degree_report(const ConstraintFunction& c, const SystemModel& sys,
                                            const std::vector<StateVector>& samples);

// True iff L_g L_f^i c vanishes for i < m-1 and is nonzero for i = m-1 at
// every sample. Throws ConfigError when m > 1 and the evaluators are missing.
bool check_relative_degree(const ConstraintFunction& c, const SystemModel& sys,
                           const std::vector<StateVector>& samples);

bool all_finite(const Eigen::VectorXd& v);

namespace models {

// x' = u1, y' = u2.
SystemModel single_integrator_2d();

// x' = v, v' = u.
SystemModel double_integrator_1d();

}  // namespace models

namespace constraints {

// b(x) = (x - cx)^2 + (y - cy)^2 - R^2 on the first two state components.
// Nonnegative outside the disk.
ConstraintFunction disk_exterior(std::string tag, Eigen::Vector2d center, double radius);

// h(x) = R^2 - (x - cx)^2 - (y - cy)^2. Nonnegative inside the disk.
ConstraintFunction disk_interior(std::string tag, Eigen::Vector2d center, double radius);

// c(x) = x_index - limit on the double integrator, relative degree 2 with
// L_f c = v.
ConstraintFunction position_lower_limit(std::string tag, double limit);

// c(x) = x_index - limit declared with relative degree 1. Used for
// negative tests; it is not a valid m = 1 function on a double integrator.
ConstraintFunction coordinate(std::string tag, int index, int state_dim, double limit = 0.0);

}  // namespace constraints

}  // namespace fccbf
