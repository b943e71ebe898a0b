#pragma once

#include "fccbf/barriers.hpp"
#include "fccbf/model.hpp"
#include "fccbf/qp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fccbf {

struct SimConfig {
    double dt = 0.01;
    double horizon = 6.0;
    int substeps = 1;
    double constraint_tol = 1e-6;
    double event_tol = 1e-6;

    // Number of control intervals; throws ConfigError unless horizon is a
    // whole multiple of dt.
    int steps() const;
    void validate() const;
};

/// Goal term of the per-step QP plus the safety barriers that accompany it.
struct ControllerSpec {
    std::variant<std::monostate, FccbfSpec, ClbfSpec> goal;
    std::vector<HocbfSpec> safety;
    Eigen::MatrixXd hessian;
    bool relax_goal = true;
    bool relax_safety = true;

    bool has_goal() const { return !std::holds_alternative<std::monostate>(goal); }
    const ConstraintFunction* goal_function() const;
    std::string label() const;  // "fccbf", "clbf" or "safety-only"
};

enum class EventType { goal_reached, safety_violated, qp_relaxed, qp_infeasible_hard };

const char* to_string(EventType e);

struct Event {
    EventType type;
    double time = 0.0;
    std::string tag;
};

/// Closed-loop record on the uniform grid t_i = i dt.
///
/// controls[i] and qp_status[i] belong to the interval [t_i, t_{i+1}).
/// value_names lists the logged signals: "h" and "V" when a goal is present,
/// then one entry per safety barrier.
struct TrajectoryLog {
    std::string controller;
    std::vector<double> times;
    std::vector<StateVector> states;
    std::vector<ControlVector> controls;
    std::vector<QpStatus> qp_statuses;
    std::vector<double> slack_totals;
    std::vector<std::string> value_names;
    std::vector<std::vector<double>> values;  // values[t][signal]
    std::vector<Event> events;
    SolverStats solver_stats;

    std::optional<std::size_t> column(const std::string& name) const;
    std::vector<double> series(const std::string& name) const;
    std::optional<double> first_event(EventType type) const;
};

/// Per-step safety filter. Owns the warm-started QP solver, so one instance
/// serves one trajectory at a time.
class Controller {
public:
    Controller(ControllerSpec spec, const SystemModel& sys, ControlBounds bounds);

    struct Step {
        ControlVector u;
        QpSolution qp;
    };

    QpProblem assemble(const StateVector& x) const;
    Step step(const StateVector& x);

    const ControllerSpec& spec() const { return spec_; }
    const SolverStats& stats() const { return solver_.stats(); }
    void reset() { solver_.reset(); }

private:
    ControllerSpec spec_;
    const SystemModel& sys_;
    ControlBounds bounds_;
    ActiveSetQp solver_;
};

// Classical RK4 under zero-order hold, `substeps` uniform steps over dt.
// Throws NumericalError on a non-finite state.
StateVector integrate(const SystemModel& sys, const StateVector& x, const ControlVector& u, double dt,
                      int substeps = 1);

// Throws ConfigError on invalid specs, h(x0) >= 0, or an FCCBF whose (r, k)
// fail r >= (r - h(x0)) exp(-k t_f).
void validate_run(const ControllerSpec& ctrl, const SystemModel& sys, const ControlBounds& bounds,
                  const StateVector& x0, const SimConfig& cfg);

TrajectoryLog run(const ControllerSpec& ctrl, const SystemModel& sys, const ControlBounds& bounds,
                  const StateVector& x0, const SimConfig& cfg);

}  // namespace fccbf
