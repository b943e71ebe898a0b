#include "fccbf/barriers.hpp"

#include "fccbf/errors.hpp"

#include <cmath>

namespace fccbf {

double signed_pow(double v, double q)
{
    if (v == 0.0) {
        return 0.0;
    }
    return std::copysign(std::pow(std::abs(v), q), v);
}

void validate(const HocbfSpec& spec)
{
    const int m = spec.constraint.relative_degree;
    if (static_cast<int>(spec.slopes.size()) != m) {
        throw ConfigError("HOCBF '" + spec.constraint.tag + "': expected " + std::to_string(m) + " slopes, got " +
                          std::to_string(spec.slopes.size()));
    }
    for (double a : spec.slopes) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw ConfigError("HOCBF '" + spec.constraint.tag + "': class-K slopes must be positive");
        }
    }
}

void validate(const ClbfSpec& spec)
{
    if (spec.constraint.relative_degree != 1) {
        throw ConfigError("CLBF '" + spec.constraint.tag + "': relative degree must be 1");
    }
    if (!(spec.p > 0.0) || !std::isfinite(spec.p)) {
        throw ConfigError("CLBF '" + spec.constraint.tag + "': p must be positive");
    }
    if (!(spec.q_exp > 0.0 && spec.q_exp < 1.0)) {
        throw ConfigError("CLBF '" + spec.constraint.tag + "': q_exp must lie in (0, 1)");
    }
}

void validate(const FccbfSpec& spec)
{
    if (spec.constraint.relative_degree != 1) {
        throw ConfigError("FCCBF '" + spec.constraint.tag + "': relative degree must be 1");
    }
    if (!(spec.r > 0.0) || !std::isfinite(spec.r)) {
        throw ConfigError("FCCBF '" + spec.constraint.tag + "': r must be positive");
    }
    if (!(spec.k > 0.0) || !std::isfinite(spec.k)) {
        throw ConfigError("FCCBF '" + spec.constraint.tag + "': k must be positive");
    }
    if (!(spec.t_f > 0.0) || !std::isfinite(spec.t_f)) {
        throw ConfigError("FCCBF '" + spec.constraint.tag + "': t_f must be positive");
    }
}

double clbf_gain(double h0, double q_exp, double t_f)
{
    if (!(t_f > 0.0)) {
        throw DomainError("clbf_gain: t_f must be positive");
    }
    if (!(q_exp > 0.0 && q_exp < 1.0)) {
        throw DomainError("clbf_gain: q_exp must lie in (0, 1)");
    }
    // |h0| rather than h0: the initial value is negative and the exponent is
    // fractional.
    return std::pow(std::abs(h0), 1.0 - q_exp) / (t_f * (1.0 - q_exp));
}

bool finite_time_condition(double r, double k, double h0, double t_f)
{
    return r >= (r - h0) * std::exp(-k * t_f);
}

namespace {

void require_relative_degree_one(const ConstraintFunction& c, const char* kind)
{
    if (c.relative_degree != 1) {
        throw ConfigError(std::string(kind) + " '" + c.tag + "': relative degree " + std::to_string(c.relative_degree) +
                          " where 1 is required");
    }
}

}  // namespace

LinearControlConstraint build_cbf(const ConstraintFunction& b, double slope, const SystemModel& sys,
                                  const StateVector& x)
{
    require_relative_degree_one(b, "CBF");
    return {lie_g(b, sys, x), lie_f(b, sys, x) + slope * b(x), b.tag};
}

LinearControlConstraint build_hocbf(const HocbfSpec& spec, const SystemModel& sys, const StateVector& x)
{
    validate(spec);
    const ConstraintFunction& b = spec.constraint;
    const int m = b.relative_degree;

    // Lf[j] = L_f^j b for j = 0..m.
    std::vector<double> lf(static_cast<std::size_t>(m) + 1);
    lf[0] = b(x);
    for (int j = 1; j < m; ++j) {
        lf[j] = b.higher_lie_derivatives[j - 1].value(x);
    }
    lf[m] = lie_f_of_order(b, m - 1, sys, x);

    // Evaluate psi_0..psi_{m-1} as the recursion defines them, tracking each
    // psi_i as a combination of L_f^j b. The control enters only at psi_m.
    std::vector<double> weights{1.0};
    for (int i = 0; i + 1 < m; ++i) {
        std::vector<double> next(weights.size() + 1, 0.0);
        for (std::size_t j = 0; j < weights.size(); ++j) {
            next[j] += spec.slopes[i] * weights[j];
            next[j + 1] += weights[j];
        }
        weights = std::move(next);
    }
    double psi_prev = 0.0;
    double lf_psi_prev = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        psi_prev += weights[j] * lf[j];
        lf_psi_prev += weights[j] * lf[j + 1];
    }

    // Only the top term L_f^{m-1} b has a control-dependent derivative.
    const RowVector coeff = weights.back() * lie_g_of_order(b, m - 1, sys, x);
    return {coeff, lf_psi_prev + spec.slopes.back() * psi_prev, b.tag};
}

LinearControlConstraint build_clbf(const ClbfSpec& spec, const SystemModel& sys, const StateVector& x)
{
    validate(spec);
    const ConstraintFunction& b = spec.constraint;
    return {lie_g(b, sys, x), lie_f(b, sys, x) + spec.p * signed_pow(b(x), spec.q_exp), b.tag};
}

LinearControlConstraint build_fccbf(const FccbfSpec& spec, const SystemModel& sys, const StateVector& x)
{
    require_relative_degree_one(spec.constraint, "FCCBF");
    if (!(spec.k > 0.0) || !(spec.r >= 0.0)) {
        throw ConfigError("FCCBF '" + spec.constraint.tag + "': need k > 0 and r >= 0");
    }
    const ConstraintFunction& h = spec.constraint;
    // s = h - r shares the gradient of h.
    return {lie_g(h, sys, x), lie_f(h, sys, x) + spec.k * (h(x) - spec.r), h.tag};
}

}  // namespace fccbf
