#include "fccbf/design.hpp"

#include "fccbf/errors.hpp"

#include <omp.h>

#include <cmath>
#include <iostream>
#include <limits>
#include <random>

namespace fccbf {

bool ReachableSet::contains(const StateVector& y) const
{
    const double v = h(y);
    return v >= h_lower && v <= h_upper;
}

std::vector<StateVector> ReachableSet::sample(const StateBox& box, std::size_t count, std::uint64_t seed,
                                              std::size_t max_attempts) const
{
    if (box.lower.size() != box.upper.size() || box.lower.size() == 0) {
        throw ConfigError("sampling box bounds have mismatched lengths");
    }
    if ((box.upper - box.lower).minCoeff() < 0.0 || !box.lower.allFinite() || !box.upper.allFinite()) {
        throw ConfigError("sampling box must be finite with lower <= upper");
    }
    if (max_attempts == 0) {
        max_attempts = std::max<std::size_t>(1000, 1000 * count);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<StateVector> out;
    out.reserve(count);
    StateVector y(box.lower.size());
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (attempts++ >= max_attempts) {
            throw DomainError("reachable-set sampler exhausted after " + std::to_string(max_attempts) +
                              " draws with " + std::to_string(out.size()) + " accepted");
        }
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
        }
        if (contains(y)) {
            out.push_back(y);
        }
    }
    return out;
}

ReachableSet reachable_set(const ConstraintFunction& h, const StateVector& x0)
{
    const double h0 = h(x0);
    if (!(h0 < 0.0)) {
        throw DomainError("reachable set needs h(x0) < 0, got " + std::to_string(h0));
    }
    return ReachableSet{h, h0, 0.0};
}

double k_lower_bound(double r, double h0, double t_f)
{
    if (!(r > 0.0) || !(h0 < 0.0) || !(t_f > 0.0)) {
        throw DomainError("k_lower_bound needs r > 0, h0 < 0, t_f > 0");
    }
    return std::log((r - h0) / r) / t_f;
}

ValidityTerms validity_terms(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                             const StateVector& x)
{
    const double s = spec.strengthened(x);
    return {lie_f(spec.constraint, sys, x) + spec.k * s, -bounds.support(lie_g(spec.constraint, sys, x))};
}

double k_upper_bound_initial(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                             const StateVector& x0)
{
    const double s0 = spec.strengthened(x0);
    const double available = lie_f(spec.constraint, sys, x0) + bounds.support(lie_g(spec.constraint, sys, x0));
    if (s0 == 0.0) {
        std::cerr << "warning: s(x0) = 0, FCCBF constraint is trivially feasible at x0\n";
        return std::numeric_limits<double>::infinity();
    }
    if (s0 > 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    // available + k s0 >= 0  <=>  k <= available / -s0
    if (std::isinf(available) && available > 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::max(0.0, available / -s0);
}

KInterval feasible_k_interval(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                              const StateVector& x0)
{
    KInterval iv;
    iv.k_min = k_lower_bound(spec.r, spec.constraint(x0), spec.t_f);
    iv.k_max = k_upper_bound_initial(spec, sys, bounds, x0);
    iv.nonempty = iv.k_min <= iv.k_max && iv.k_max > 0.0;
    return iv;
}

const char* to_string(FeasibilityMode m)
{
    return m == FeasibilityMode::initial_state ? "initial_state" : "sampled";
}

FeasibilityReport check_validity_initial(const FccbfSpec& spec, const SystemModel& sys,
                                         const ControlBounds& bounds, const StateVector& x0)
{
    FeasibilityReport rep = serial::check_validity_on(spec, sys, bounds, {x0});
    rep.mode = FeasibilityMode::initial_state;
    return rep;
}

namespace {

struct Extremes {
    double min_drift = std::numeric_limits<double>::infinity();
    double max_actuation = -std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t argmin = 0;
};

// Ties resolve to the lowest index so the result does not depend on how
// samples are split across threads.
void merge(Extremes& into, const Extremes& other)
{
    into.min_drift = std::min(into.min_drift, other.min_drift);
    into.max_actuation = std::max(into.max_actuation, other.max_actuation);
    if (other.min_margin < into.min_margin ||
        (other.min_margin == into.min_margin && other.argmin < into.argmin)) {
        into.min_margin = other.min_margin;
        into.argmin = other.argmin;
    }
}

void accumulate(Extremes& e, const ValidityTerms& t, std::size_t i)
{
    e.min_drift = std::min(e.min_drift, t.drift_term);
    e.max_actuation = std::max(e.max_actuation, t.actuation_term);
    const double m = t.margin();
    if (m < e.min_margin || (m == e.min_margin && i < e.argmin)) {
        e.min_margin = m;
        e.argmin = i;
    }
}

FeasibilityReport make_report(const Extremes& e, const std::vector<StateVector>& samples)
{
    FeasibilityReport rep;
    rep.mode = FeasibilityMode::sampled;
    rep.n_samples = samples.size();
    rep.margin = e.min_margin;
    rep.worst_state = samples[e.argmin];
    rep.pointwise_pass = e.min_margin >= 0.0;
    // With infinite bounds the actuation term is -inf and the test passes.
    rep.decoupled_margin = e.min_drift - e.max_actuation;
    rep.decoupled_pass = e.min_drift >= e.max_actuation;
    return rep;
}

void require_samples(const std::vector<StateVector>& samples)
{
    if (samples.empty()) {
        throw DomainError("validity check needs at least one sample");
    }
}

}  // namespace

namespace serial {

FeasibilityReport check_validity_on(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                                    const std::vector<StateVector>& samples)
{
    require_samples(samples);
    Extremes e;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        accumulate(e, validity_terms(spec, sys, bounds, samples[i]), i);
    }
    return make_report(e, samples);
}

}  // namespace serial

FeasibilityReport check_validity_on(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                                    const std::vector<StateVector>& samples)
{
    require_samples(samples);
    const auto n = static_cast<std::int64_t>(samples.size());
    Extremes total;
#pragma omp parallel
    {
        Extremes local;
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            accumulate(local, validity_terms(spec, sys, bounds, samples[i]), static_cast<std::size_t>(i));
        }
#pragma omp critical
        merge(total, local);
    }
    return make_report(total, samples);
}

FeasibilityReport check_validity_sampled(const FccbfSpec& spec, const SystemModel& sys,
                                         const ControlBounds& bounds, const ReachableSet& reach,
                                         const StateBox& box, std::size_t n_samples, std::uint64_t seed)
{
    if (n_samples < 1) {
        throw DomainError("validity check needs n_samples >= 1");
    }
    // Samples are drawn serially so the set is fixed by the seed alone.
    return check_validity_on(spec, sys, bounds, reach.sample(box, n_samples, seed));
}

double k_upper_bound_sampled(const FccbfSpec& spec, const SystemModel& sys, const ControlBounds& bounds,
                             const std::vector<StateVector>& samples)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : samples) {
        const double s = spec.strengthened(x);
        if (s >= 0.0) {
            continue;
        }
        const double available = lie_f(spec.constraint, sys, x) + bounds.support(lie_g(spec.constraint, sys, x));
        best = std::min(best, std::max(0.0, available / -s));
    }
    return best;
}

}  // namespace fccbf
