#include "fccbf/model.hpp"

#include "fccbf/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace fccbf {

namespace {

std::string shape_message(const std::string& what, long expected, long actual)
{
    std::ostringstream os;
    os << what << ": expected " << expected << ", got " << actual;
    return os.str();
}

}  // namespace

bool all_finite(const Eigen::VectorXd& v)
{
    return v.allFinite();
}

SystemModel::SystemModel(std::string name, int state_dim, int control_dim, Drift drift, Actuation actuation)
    : name_(std::move(name)),
      state_dim_(state_dim),
      control_dim_(control_dim),
      drift_(std::move(drift)),
      actuation_(std::move(actuation))
{
    if (state_dim_ <= 0 || control_dim_ <= 0) {
        throw ConfigError("system '" + name_ + "': dimensions must be positive");
    }
    if (!drift_ || !actuation_) {
        throw ConfigError("system '" + name_ + "': drift and actuation evaluators are required");
    }
}

void SystemModel::check_state(const StateVector& x) const
{
    if (x.size() != state_dim_) {
        throw ConfigError(shape_message("system '" + name_ + "' state length", state_dim_, x.size()));
    }
}

StateVector SystemModel::drift(const StateVector& x) const
{
    check_state(x);
    StateVector fx = drift_(x);
    if (fx.size() != state_dim_) {
        throw ConfigError(shape_message("system '" + name_ + "' drift length", state_dim_, fx.size()));
    }
    return fx;
}

Eigen::MatrixXd SystemModel::actuation(const StateVector& x) const
{
    check_state(x);
    Eigen::MatrixXd gx = actuation_(x);
    if (gx.rows() != state_dim_ || gx.cols() != control_dim_) {
        throw ConfigError("system '" + name_ + "': actuation must be " + std::to_string(state_dim_) + "x" +
                          std::to_string(control_dim_));
    }
    return gx;
}

StateVector SystemModel::derivative(const StateVector& x, const ControlVector& u) const
{
    if (u.size() != control_dim_) {
        throw ConfigError(shape_message("system '" + name_ + "' control length", control_dim_, u.size()));
    }
    return drift(x) + actuation(x) * u;
}

ControlBounds::ControlBounds(Eigen::VectorXd lo, Eigen::VectorXd hi) : u_min(std::move(lo)), u_max(std::move(hi))
{
    if (u_min.size() != u_max.size()) {
        throw ConfigError("control bounds: u_min and u_max lengths differ");
    }
    for (Eigen::Index j = 0; j < u_min.size(); ++j) {
        if (std::isnan(u_min[j]) || std::isnan(u_max[j]) || u_min[j] > u_max[j]) {
            throw ConfigError("control bounds: u_min[" + std::to_string(j) + "] > u_max[" + std::to_string(j) + "]");
        }
    }
}

ControlBounds ControlBounds::symmetric(const Eigen::VectorXd& magnitude)
{
    return ControlBounds(-magnitude, magnitude);
}

ControlBounds ControlBounds::unbounded(int control_dim)
{
    const double inf = std::numeric_limits<double>::infinity();
    return ControlBounds(Eigen::VectorXd::Constant(control_dim, -inf), Eigen::VectorXd::Constant(control_dim, inf));
}

bool ControlBounds::contains(const ControlVector& u, double tol) const
{
    return u.size() == u_min.size() && max_violation(u) <= tol;
}

double ControlBounds::max_violation(const ControlVector& u) const
{
    double worst = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        worst = std::max({worst, u_min[j] - u[j], u[j] - u_max[j]});
    }
    return worst;
}

ControlVector ControlBounds::clamp(const ControlVector& u) const
{
    return u.cwiseMax(u_min).cwiseMin(u_max);
}

double ControlBounds::support(const RowVector& a) const
{
    double total = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        if (a[j] > 0.0) {
            total += a[j] * u_max[j];
        } else if (a[j] < 0.0) {
            total += a[j] * u_min[j];
        }
    }
    return total;
}

namespace {

const LieDerivativeEvaluator* higher_order(const ConstraintFunction& c, int order)
{
    if (order < 0 || order >= c.relative_degree) {
        throw ConfigError("constraint '" + c.tag + "': Lie derivative order " + std::to_string(order) +
                          " outside [0, " + std::to_string(c.relative_degree - 1) + "]");
    }
    if (order == 0) {
        return nullptr;
    }
    if (static_cast<int>(c.higher_lie_derivatives.size()) < order || !c.higher_lie_derivatives[order - 1].value ||
        !c.higher_lie_derivatives[order - 1].gradient) {
        throw ConfigError("constraint '" + c.tag + "': relative degree " + std::to_string(c.relative_degree) +
                          " requires L_f^" + std::to_string(order) + " evaluators");
    }
    return &c.higher_lie_derivatives[order - 1];
}

RowVector checked_gradient(const GradientField& grad, const std::string& tag, const SystemModel& sys,
                           const StateVector& x)
{
    if (x.size() != sys.state_dim()) {
        throw ConfigError(shape_message("constraint '" + tag + "' state length", sys.state_dim(), x.size()));
    }
    RowVector d = grad(x);
    if (d.size() != sys.state_dim()) {
        throw ConfigError(shape_message("constraint '" + tag + "' gradient length", sys.state_dim(), d.size()));
    }
    return d;
}

}  // namespace

double lie_f_of_order(const ConstraintFunction& c, int order, const SystemModel& sys, const StateVector& x)
{
    const auto* ev = higher_order(c, order);
    const RowVector d = checked_gradient(ev ? ev->gradient : c.gradient, c.tag, sys, x);
    return d.dot(sys.drift(x));
}

RowVector lie_g_of_order(const ConstraintFunction& c, int order, const SystemModel& sys, const StateVector& x)
{
    const auto* ev = higher_order(c, order);
    const RowVector d = checked_gradient(ev ? ev->gradient : c.gradient, c.tag, sys, x);
    return d * sys.actuation(x);
}

double lie_f(const ConstraintFunction& c, const SystemModel& sys, const StateVector& x)
{
    return checked_gradient(c.gradient, c.tag, sys, x).dot(sys.drift(x));
}

RowVector lie_g(const ConstraintFunction& c, const SystemModel& sys, const StateVector& x)
{
    return checked_gradient(c.gradient, c.tag, sys, x) * sys.actuation(x);
}

RelativeDegreeReport relative_degree_report(const ConstraintFunction& c, const SystemModel& sys,
                                            const std::vector<StateVector>& samples)
{
    if (samples.empty()) {
        throw DomainError("relative degree check needs at least one sample");
    }
    const int m = c.relative_degree;
    if (m < 1) {
        throw ConfigError("constraint '" + c.tag + "': relative degree must be positive");
    }
    for (int i = 1; i < m; ++i) {
        higher_order(c, i);
    }

    RelativeDegreeReport report;
    report.consistent = true;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (int i = 0; i + 1 < m; ++i) {
            if (lie_g_of_order(c, i, sys, samples[s]).cwiseAbs().maxCoeff() >= kRelativeDegreeTol) {
                report.consistent = false;
            }
        }
        if (lie_g_of_order(c, m - 1, sys, samples[s]).cwiseAbs().maxCoeff() < kRelativeDegreeTol) {
            report.degenerate_samples.push_back(s);
        }
    }
    if (report.degenerate_samples.size() == samples.size()) {
        report.consistent = false;
    }
    return report;
}

bool check_relative_degree(const ConstraintFunction& c, const SystemModel& sys,
                           const std::vector<StateVector>& samples)
{
    const auto report = relative_degree_report(c, sys, samples);
    return report.consistent && report.degenerate_samples.empty();
}

namespace models {

SystemModel single_integrator_2d()
{
    return SystemModel(
        "single-integrator-2d", 2, 2, [](const StateVector&) { return StateVector::Zero(2).eval(); },
        [](const StateVector&) { return Eigen::MatrixXd::Identity(2, 2).eval(); });
}

SystemModel double_integrator_1d()
{
    return SystemModel(
        "double-integrator-1d", 2, 1,
        [](const StateVector& x) {
            StateVector f(2);
            f << x[1], 0.0;
            return f;
        },
        [](const StateVector&) {
            Eigen::MatrixXd g(2, 1);
            g << 0.0, 1.0;
            return g;
        });
}

}  // namespace models

namespace constraints {

ConstraintFunction disk_exterior(std::string tag, Eigen::Vector2d center, double radius)
{
    if (!(radius > 0.0)) {
        throw ConfigError("disk '" + tag + "': radius must be positive");
    }
    ConstraintFunction c;
    c.tag = std::move(tag);
    c.value = [center, radius](const StateVector& x) {
        const double dx = x[0] - center[0];
        const double dy = x[1] - center[1];
        return dx * dx + dy * dy - radius * radius;
    };
    c.gradient = [center](const StateVector& x) {
        RowVector d = RowVector::Zero(x.size());
        d[0] = 2.0 * (x[0] - center[0]);
        d[1] = 2.0 * (x[1] - center[1]);
        return d;
    };
    return c;
}

ConstraintFunction disk_interior(std::string tag, Eigen::Vector2d center, double radius)
{
    if (!(radius > 0.0)) {
        throw ConfigError("disk '" + tag + "': radius must be positive");
    }
    ConstraintFunction c;
    c.tag = std::move(tag);
    c.value = [center, radius](const StateVector& x) {
        const double dx = x[0] - center[0];
        const double dy = x[1] - center[1];
        return radius * radius - dx * dx - dy * dy;
    };
    c.gradient = [center](const StateVector& x) {
        RowVector d = RowVector::Zero(x.size());
        d[0] = -2.0 * (x[0] - center[0]);
        d[1] = -2.0 * (x[1] - center[1]);
        return d;
    };
    return c;
}

ConstraintFunction position_lower_limit(std::string tag, double limit)
{
    ConstraintFunction c;
    c.tag = std::move(tag);
    c.relative_degree = 2;
    c.value = [limit](const StateVector& x) { return x[0] - limit; };
    c.gradient = [](const StateVector&) {
        RowVector d(2);
        d << 1.0, 0.0;
        return d;
    };
    // L_f c = v
    c.higher_lie_derivatives.push_back({[](const StateVector& x) { return x[1]; },
                                        [](const StateVector&) {
                                            RowVector d(2);
                                            d << 0.0, 1.0;
                                            return d;
                                        }});
    return c;
}

ConstraintFunction coordinate(std::string tag, int index, int state_dim, double limit)
{
    if (index < 0 || index >= state_dim) {
        throw ConfigError("coordinate constraint: index out of range");
    }
    ConstraintFunction c;
    c.tag = std::move(tag);
    c.value = [index, limit](const StateVector& x) { return x[index] - limit; };
    c.gradient = [index, state_dim](const StateVector&) {
        RowVector d = RowVector::Zero(state_dim);
        d[index] = 1.0;
        return d;
    };
    return c;
}

}  // namespace constraints

}  // namespace fccbf
