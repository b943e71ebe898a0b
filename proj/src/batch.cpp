#include "fccbf/bench.hpp"

#include "fccbf/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace fccbf {

int batch_threads()
{
    int cap = omp_get_max_threads();
    if (const char* env = std::getenv("FCCBF_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            cap = static_cast<int>(std::min<long>(v, cap));
        }
    }
    return std::max(1, cap);
}

bool run_verdict(const RunResult& r, const Thresholds& th)
{
    if (!r.error.empty()) {
        return false;
    }
    if (r.control_bound_max_violation > th.bound_violation) {
        return false;
    }
    if (r.controller == "clbf") {
        return true;
    }
    if (r.min_barrier && *r.min_barrier < th.min_barrier) {
        return false;
    }
    if (r.controller == "fccbf") {
        if (!r.h_at_tf || *r.h_at_tf < 0.0) {
            return false;
        }
        if (!r.envelope_max_ratio || *r.envelope_max_ratio > 1.0 + th.envelope) {
            return false;
        }
    }
    return true;
}

namespace {

nlohmann::json plan_parameters(const RunPlan& plan)
{
    nlohmann::json p = nlohmann::json::object();
    if (const auto* f = std::get_if<FccbfSpec>(&plan.controller.goal)) {
        p["r"] = f->r;
        p["k"] = f->k;
        p["t_f"] = f->t_f;
    } else if (const auto* c = std::get_if<ClbfSpec>(&plan.controller.goal)) {
        p["p"] = c->p;
        p["q_exp"] = c->q_exp;
    }
    if (!plan.controller.safety.empty()) {
        p["safety_slopes"] = plan.controller.safety.front().slopes;
    }
    return p;
}

RunResult base_result(const RunPlan& plan)
{
    RunResult r;
    r.index = plan.index;
    r.init_index = plan.init_index;
    r.controller = plan.controller.label();
    r.x0 = plan.x0;
    r.parameters = plan_parameters(plan);
    r.k_interval = plan.k_interval;
    r.feasibility = plan.feasibility;
    return r;
}

void execute(const Scenario& sc, const SystemModel& sys, const RunPlan& plan, const Thresholds& th,
             TrajectoryLog& log, RunResult& result)
{
    try {
        log = run(plan.controller, sys, sc.bounds, plan.x0, sc.sim);
        result = summarize_run(sc, plan, log, th);
    } catch (const std::exception& e) {
        result = base_result(plan);
        result.error = e.what();
        result.verdict = false;
    }
}

BatchResult assemble(const Scenario& sc, std::vector<TrajectoryLog> logs, std::vector<RunResult> results,
                     const Thresholds& th)
{
    BatchResult out;
    out.logs = std::move(logs);
    out.summary.scenario = sc.name;
    out.summary.thresholds = th;
    out.summary.runs = std::move(results);
    out.summary.verdict = std::all_of(out.summary.runs.begin(), out.summary.runs.end(),
                                      [](const RunResult& r) { return r.verdict; });
    return out;
}

}  // namespace

RunResult summarize_run(const Scenario& sc, const RunPlan& plan, const TrajectoryLog& log, const Thresholds& th)
{
    RunResult r = base_result(plan);
    r.goal_reached_time = log.first_event(EventType::goal_reached);
    r.safety_violated_time = log.first_event(EventType::safety_violated);

    const auto tf_index = static_cast<std::size_t>(std::llround(sc.t_f / sc.sim.dt));
    if (const auto h = log.column("h"); h && tf_index < log.values.size()) {
        r.h_at_tf = log.values[tf_index][*h];
    }

    const std::size_t first_barrier = plan.controller.has_goal() ? 2 : 0;
    if (log.value_names.size() > first_barrier) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& row : log.values) {
            for (std::size_t j = first_barrier; j < row.size(); ++j) {
                lo = std::min(lo, row[j]);
            }
        }
        r.min_barrier = lo;
    }

    for (const auto& u : log.controls) {
        r.control_bound_max_violation = std::max(r.control_bound_max_violation, sc.bounds.max_violation(u));
    }
    for (QpStatus s : log.qp_statuses) {
        r.qp_relaxed_count += s == QpStatus::relaxed;
        r.qp_infeasible_count += s == QpStatus::infeasible_hard;
    }
    r.qp_iterations = log.solver_stats.iterations;

    if (const auto* f = std::get_if<FccbfSpec>(&plan.controller.goal)) {
        const auto V = log.series("V");
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < V.size(); ++i) {
            worst = std::max(worst, V[i] / (V[0] * std::exp(-f->k * log.times[i])));
        }
        r.envelope_max_ratio = worst;
    }
    r.verdict = run_verdict(r, th);
    return r;
}

BatchResult run_batch(const Scenario& sc, const Thresholds& th)
{
    const SystemModel sys = sc.model();
    const auto n = static_cast<std::int64_t>(sc.plans.size());
    std::vector<TrajectoryLog> logs(sc.plans.size());
    std::vector<RunResult> results(sc.plans.size());
    // Each run owns its solver and log slot; results land at the plan index.
#pragma omp parallel for schedule(dynamic) num_threads(batch_threads())
    for (std::int64_t i = 0; i < n; ++i) {
        execute(sc, sys, sc.plans[i], th, logs[i], results[i]);
    }
    return assemble(sc, std::move(logs), std::move(results), th);
}

namespace serial {

BatchResult run_batch(const Scenario& sc, const Thresholds& th)
{
    const SystemModel sys = sc.model();
    std::vector<TrajectoryLog> logs(sc.plans.size());
    std::vector<RunResult> results(sc.plans.size());
    for (std::size_t i = 0; i < sc.plans.size(); ++i) {
        execute(sc, sys, sc.plans[i], th, logs[i], results[i]);
    }
    return assemble(sc, std::move(logs), std::move(results), th);
}

}  // namespace serial

}  // namespace fccbf
