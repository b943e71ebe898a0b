#include "fccbf/sim.hpp"

#include "fccbf/errors.hpp"

#include <cmath>
#include <sstream>

namespace fccbf {

int SimConfig::steps() const
{
    validate();
    const double n = horizon / dt;
    const double rounded = std::round(n);
    if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n)) {
        throw ConfigError("sim: horizon must be a whole multiple of dt");
    }
    return static_cast<int>(rounded);
}

void SimConfig::validate() const
{
    if (!(dt > 0.0) || !(horizon > 0.0) || !std::isfinite(dt) || !std::isfinite(horizon)) {
        throw ConfigError("sim: dt and horizon must be positive");
    }
    if (dt > horizon) {
        throw ConfigError("sim: dt must not exceed horizon");
    }
    if (substeps < 1) {
        throw ConfigError("sim: substeps must be >= 1");
    }
    if (!(constraint_tol >= 0.0) || !(event_tol > 0.0)) {
        throw ConfigError("sim: tolerances must be nonnegative (event_tol positive)");
    }
}

const ConstraintFunction* ControllerSpec::goal_function() const
{
    if (const auto* f = std::get_if<FccbfSpec>(&goal)) {
        return &f->constraint;
    }
    if (const auto* c = std::get_if<ClbfSpec>(&goal)) {
        return &c->constraint;
    }
    return nullptr;
}

std::string ControllerSpec::label() const
{
    if (std::holds_alternative<FccbfSpec>(goal)) {
        return "fccbf";
    }
    if (std::holds_alternative<ClbfSpec>(goal)) {
        return "clbf";
    }
    return "safety-only";
}

const char* to_string(EventType e)
{
    switch (e) {
    case EventType::goal_reached:
        return "goal-reached";
    case EventType::safety_violated:
        return "safety-violated";
    case EventType::qp_relaxed:
        return "qp-relaxed";
    case EventType::qp_infeasible_hard:
        return "qp-infeasible-hard";
    }
    return "unknown";
}

std::optional<std::size_t> TrajectoryLog::column(const std::string& name) const
{
    for (std::size_t i = 0; i < value_names.size(); ++i) {
        if (value_names[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<double> TrajectoryLog::series(const std::string& name) const
{
    const auto c = column(name);
    if (!c) {
        throw ConfigError("trajectory log has no signal '" + name + "'");
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& row : values) {
        out.push_back(row[*c]);
    }
    return out;
}

std::optional<double> TrajectoryLog::first_event(EventType type) const
{
    for (const auto& e : events) {
        if (e.type == type) {
            return e.time;
        }
    }
    return std::nullopt;
}

Controller::Controller(ControllerSpec spec, const SystemModel& sys, ControlBounds bounds)
    : spec_(std::move(spec)), sys_(sys), bounds_(std::move(bounds))
{
    if (spec_.hessian.size() == 0) {
        spec_.hessian = Eigen::MatrixXd::Identity(sys_.control_dim(), sys_.control_dim());
    }
    if (spec_.hessian.rows() != sys_.control_dim()) {
        throw ConfigError("controller hessian does not match control dimension");
    }
    for (const auto& hs : spec_.safety) {
        validate(hs);
    }
}

QpProblem Controller::assemble(const StateVector& x) const
{
    QpProblem p;
    p.hessian = spec_.hessian;
    p.bounds = bounds_;
    if (const auto* f = std::get_if<FccbfSpec>(&spec_.goal)) {
        p.rows.push_back(build_fccbf(*f, sys_, x));
    } else if (const auto* c = std::get_if<ClbfSpec>(&spec_.goal)) {
        p.rows.push_back(build_clbf(*c, sys_, x));
    }
    if (spec_.has_goal() && spec_.relax_goal) {
        p.relax_tags.insert(p.rows.front().tag);
    }
    for (const auto& hs : spec_.safety) {
        p.rows.push_back(build_hocbf(hs, sys_, x));
        if (spec_.relax_safety) {
            p.relax_tags.insert(hs.constraint.tag);
        }
    }
    return p;
}

Controller::Step Controller::step(const StateVector& x)
{
    if (!all_finite(x)) {
        throw NumericalError("controller received a non-finite state");
    }
    QpSolution sol = solver_.solve(assemble(x));
    ControlVector u = sol.u;
    return {std::move(u), std::move(sol)};
}

StateVector integrate(const SystemModel& sys, const StateVector& x, const ControlVector& u, double dt, int substeps)
{
    if (substeps < 1) {
        throw ConfigError("integrate: substeps must be >= 1");
    }
    const double h = dt / substeps;
    StateVector y = x;
    for (int i = 0; i < substeps; ++i) {
        const StateVector k1 = sys.derivative(y, u);
        const StateVector k2 = sys.derivative(y + 0.5 * h * k1, u);
        const StateVector k3 = sys.derivative(y + 0.5 * h * k2, u);
        const StateVector k4 = sys.derivative(y + h * k3, u);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!all_finite(y)) {
            std::ostringstream os;
            os << "integrate: non-finite state after substep " << i << " from x = [" << x.transpose()
               << "], u = [" << u.transpose() << "]";
            throw NumericalError(os.str());
        }
    }
    return y;
}

void validate_run(const ControllerSpec& ctrl, const SystemModel& sys, const ControlBounds& bounds,
                  const StateVector& x0, const SimConfig& cfg)
{
    cfg.validate();
    if (x0.size() != sys.state_dim() || !all_finite(x0)) {
        throw ConfigError("initial state must be finite with length " + std::to_string(sys.state_dim()));
    }
    if (bounds.dim() != sys.control_dim()) {
        throw ConfigError("control bounds dimension does not match system");
    }
    for (const auto& hs : ctrl.safety) {
        validate(hs);
    }
    if (const auto* f = std::get_if<FccbfSpec>(&ctrl.goal)) {
        validate(*f);
        const double h0 = f->constraint(x0);
        if (!(h0 < 0.0)) {
            throw ConfigError("goal '" + f->constraint.tag + "' already satisfied at x0 (h = " + std::to_string(h0) +
                              "); finite-time convergence needs h(x0) < 0");
        }
        if (!finite_time_condition(f->r, f->k, h0, f->t_f)) {
            throw ConfigError("FCCBF (r, k) violate r >= (r - h(x0)) exp(-k t_f)");
        }
    } else if (const auto* c = std::get_if<ClbfSpec>(&ctrl.goal)) {
        validate(*c);
        if (!(c->constraint(x0) < 0.0)) {
            throw ConfigError("goal '" + c->constraint.tag + "' already satisfied at x0; needs h(x0) < 0");
        }
    }
}

namespace {

double crossing_time(double t0, double v0, double t1, double v1, double level, double resolution)
{
    const double frac = (v1 == v0) ? 1.0 : (level - v0) / (v1 - v0);
    const double t = t0 + std::clamp(frac, 0.0, 1.0) * (t1 - t0);
    return std::round(t / resolution) * resolution;
}

std::vector<double> signal_row(const ControllerSpec& ctrl, const StateVector& x)
{
    std::vector<double> row;
    if (const auto* f = std::get_if<FccbfSpec>(&ctrl.goal)) {
        const double h = f->constraint(x);
        row.push_back(h);
        row.push_back(f->r - h);
    } else if (const auto* c = std::get_if<ClbfSpec>(&ctrl.goal)) {
        const double h = c->constraint(x);
        row.push_back(h);
        // No strengthening margin for the CLBF; V reduces to -h.
        row.push_back(-h);
    }
    for (const auto& hs : ctrl.safety) {
        row.push_back(hs.constraint(x));
    }
    return row;
}

}  // namespace

TrajectoryLog run(const ControllerSpec& ctrl, const SystemModel& sys, const ControlBounds& bounds,
                  const StateVector& x0, const SimConfig& cfg)
{
    validate_run(ctrl, sys, bounds, x0, cfg);
    const int n = cfg.steps();

    Controller controller(ctrl, sys, bounds);
    TrajectoryLog log;
    log.controller = ctrl.label();
    if (ctrl.has_goal()) {
        log.value_names = {"h", "V"};
    }
    const std::size_t first_barrier = log.value_names.size();
    for (const auto& hs : ctrl.safety) {
        log.value_names.push_back(hs.constraint.tag);
    }

    log.times.reserve(n + 1);
    log.states.reserve(n + 1);
    log.controls.reserve(n);
    log.times.push_back(0.0);
    log.states.push_back(x0);
    log.values.push_back(signal_row(ctrl, x0));

    std::vector<char> violated(ctrl.safety.size(), 0);
    bool goal_reached = false;
    QpStatus prev_status = QpStatus::optimal;
    StateVector x = x0;

    auto scan_events = [&](int i) {
        const auto& prev = log.values[i - 1];
        const auto& cur = log.values[i];
        const double t0 = log.times[i - 1];
        const double t1 = log.times[i];
        if (ctrl.has_goal() && !goal_reached && cur[0] >= 0.0) {
            goal_reached = true;
            log.events.push_back({EventType::goal_reached, crossing_time(t0, prev[0], t1, cur[0], 0.0, cfg.event_tol),
                                  ctrl.goal_function()->tag});
        }
        for (std::size_t b = 0; b < ctrl.safety.size(); ++b) {
            const double level = -cfg.constraint_tol;
            if (!violated[b] && cur[first_barrier + b] < level) {
                violated[b] = 1;
                log.events.push_back({EventType::safety_violated,
                                      crossing_time(t0, prev[first_barrier + b], t1, cur[first_barrier + b], level,
                                                    cfg.event_tol),
                                      ctrl.safety[b].constraint.tag});
            }
        }
    };

    for (int i = 0; i < n; ++i) {
        const double t = i * cfg.dt;
        auto step = controller.step(x);
        const QpStatus status = step.qp.status;
        if (status != prev_status) {
            if (status == QpStatus::relaxed) {
                log.events.push_back({EventType::qp_relaxed, t, ""});
            } else if (status == QpStatus::infeasible_hard) {
                log.events.push_back({EventType::qp_infeasible_hard, t, ""});
            }
        }
        prev_status = status;

        x = integrate(sys, x, step.u, cfg.dt, cfg.substeps);
        log.controls.push_back(step.u);
        log.qp_statuses.push_back(status);
        log.slack_totals.push_back(step.qp.slack_total());
        log.times.push_back((i + 1) * cfg.dt);
        log.states.push_back(x);
        log.values.push_back(signal_row(ctrl, x));
        scan_events(i + 1);
    }
    log.solver_stats = controller.stats();
    return log;
}

}  // namespace fccbf
