#pragma once

#include "fccbf/barriers.hpp"
#include "fccbf/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace fccbf {

/// Axis-aligned box in state space, used as the ambient region for
/// rejection sampling.
struct StateBox {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

/// R(x0) = { y : h(x0) <= h(y) <= 0 }, the states a monotone-h closed loop
/// can visit before reaching the goal set.
struct ReachableSet {
    ConstraintFunction h;
    double h_lower = 0.0;
    double h_upper = 0.0;

    bool contains(const StateVector& y) const;

    // Seeded rejection sampling over box. The sequence depends only on
    // (box, count, seed). Throws DomainError after max_attempts draws.
    std::vector<StateVector> sample(const StateBox& box, std::size_t count, std::uint64_t seed,
                                    std::size_t max_attempts = 0) const;
};

// Throws DomainError unless h(x0) < 0.
ReachableSet reachable_set(const ConstraintFunction& h, const StateVector& x0);

struct KInterval {
    double k_min = 0.0;
    double k_max = 0.0;
    bool nonempty = false;

    double midpoint() const { return 0.5 * (k_min + k_max); }
};

// (1/t_f) ln((r - h0)/r): the smallest k with r >= (r - h0) exp(-k t_f).
double k_lower_bound(double r, double h0, double t_f);

// Largest k such that L_f s(x0) + k s(x0) + max_{u in U} L_g s(x0) u >= 0.
// Returns +inf when s(x0) = 0 or the bounds are unbounded along L_g s.
double k_upper_bound_initial(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                             const StateVector& x0);

KInterval feasible_k_interval(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                              const StateVector& x0);

enum class FeasibilityMode { initial_state, sampled };

const char* to_string(FeasibilityMode m);

/// Outcome of checking an FCCBF against the control bounds.
///
/// decoupled_pass is the min/max test over the whole sample set; it implies
/// pointwise_pass. A sampled pass is evidence over n_samples states, not a
/// certificate.
struct FeasibilityReport {
    FeasibilityMode mode = FeasibilityMode::sampled;
    bool decoupled_pass = false;
    bool pointwise_pass = false;
    StateVector worst_state;
    double margin = 0.0;  // min over samples of the pointwise margin
    double decoupled_margin = 0.0;
    std::size_t n_samples = 0;
};

// Per-state quantities for the FCCBF/bound comparison at x:
//   drift_term     = L_f s(x) + k s(x)
//   actuation_term = -max_{u in U} L_g s(x) u  (worst case of -L_g s u)
struct ValidityTerms {
    double drift_term = 0.0;
    double actuation_term = 0.0;

    double margin() const { return drift_term - actuation_term; }
};

ValidityTerms validity_terms(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                             const StateVector& x);

// Initial-state fast path: evaluates the validity test at x0 only. Sound when
// the caller knows the worst case over R(x0) is attained at x0.
FeasibilityReport check_validity_initial(const FccbfSpec& spec, const SystemModel& sys,
                                         const ControlBounds& bounds, const StateVector& x0);

// Sampled check over the reachable set, using OpenMP across samples. The
// result is identical for any thread count.
FeasibilityReport check_validity_sampled(const FccbfSpec& spec, const SystemModel& sys,
                                         const ControlBounds& bounds, const ReachableSet& reach,
                                         const StateBox& box, std::size_t n_samples, std::uint64_t seed);

// Same check evaluated on caller-provided states.
FeasibilityReport check_validity_on(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                                    const std::vector<StateVector>& samples);

namespace serial {

// Single-threaded reference for check_validity_on.
FeasibilityReport check_validity_on(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                                    const std::vector<StateVector>& samples);

}  // namespace serial

// Largest k passing the pointwise test on every sample; +inf when no sample
// has s < 0.
double k_upper_bound_sampled(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                             const std::vector<StateVector>& samples);

inline constexpr std::size_t kDefaultValiditySamples = 10000;

}  // namespace fccbf
