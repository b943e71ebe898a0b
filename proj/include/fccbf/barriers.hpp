#pragma once

#include "fccbf/model.hpp"

#include <string>
#include <vector>

namespace fccbf {

/// Half-space coeff . u + offset >= 0 in control space.
///
/// Every barrier builder emits this type, so the QP assembler does not need
/// to know which formulation produced a row.
struct LinearControlConstraint {
    RowVector coeff;
    double offset = 0.0;
    std::string tag;

    double residual(const ControlVector& u) const { return coeff.dot(u) + offset; }
};

/// Barrier of relative degree m with linear class-K gains, one per order.
struct HocbfSpec {
    ConstraintFunction constraint;
    std::vector<double> slopes;
};

/// Finite-time barrier with fractional power term p * b^q.
struct ClbfSpec {
    ConstraintFunction constraint;
    double p = 1.0;
    double q_exp = 1.0 / 3.0;
};

/// Strengthened goal s(x) = h(x) - r with exponential gain k and deadline t_f.
struct FccbfSpec {
    ConstraintFunction constraint;
    double r = 0.0;
    double k = 0.0;
    double t_f = 0.0;

    double strengthened(const StateVector& x) const { return constraint(x) - r; }
};

// sign(v) |v|^q, the odd extension of v^q to negative arguments.
double signed_pow(double v, double q);

// Throw ConfigError on invalid parameters.
void validate(const HocbfSpec& spec);
void validate(const ClbfSpec& spec);
void validate(const FccbfSpec& spec);

// Gain p that drives h from h0 to zero in exactly t_f under the CLBF
// comparison system dh/dt = p |h|^q: p = |h0|^{1-q} / (t_f (1-q)).
double clbf_gain(double h0, double q_exp, double t_f);

// True iff r >= (r - h0) exp(-k t_f).
bool finite_time_condition(double r, double k, double h0, double t_f);

LinearControlConstraint build_cbf(const ConstraintFunction& b, double slope, const SystemModel& sys,
                                  const StateVector& x);

LinearControlConstraint build_hocbf(const HocbfSpec& spec, const SystemModel& sys, const StateVector& x);

LinearControlConstraint build_clbf(const ClbfSpec& spec, const SystemModel& sys, const StateVector& x);

LinearControlConstraint build_fccbf(const FccbfSpec& spec, const SystemModel& sys, const StateVector& x);

}  // namespace fccbf
