#include "fccbf/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fccbf {

using nlohmann::json;

namespace {

json number(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

json optional_number(const std::optional<double>& v)
{
    return v ? number(*v) : json(nullptr);
}

json vector_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(number(v[i]));
    }
    return a;
}

std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& p)
{
    out.close();
    if (!out) {
        throw std::runtime_error("error writing " + p.string());
    }
}

}  // namespace

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json to_json(const KInterval& iv)
{
    return {{"k_min", number(iv.k_min)}, {"k_max", number(iv.k_max)}, {"nonempty", iv.nonempty}};
}

json to_json(const FeasibilityReport& rep)
{
    return {{"mode", to_string(rep.mode)},
            {"decoupled_pass", rep.decoupled_pass},
            {"pointwise_pass", rep.pointwise_pass},
            {"worst_state", vector_json(rep.worst_state)},
            {"margin", number(rep.margin)},
            {"decoupled_margin", number(rep.decoupled_margin)},
            {"n_samples", rep.n_samples}};
}

json to_json(const RunResult& r)
{
    json j;
    j["index"] = r.index;
    j["init_index"] = r.init_index;
    j["controller"] = r.controller;
    j["x0"] = vector_json(r.x0);
    j["parameters"] = r.parameters;
    j["k_interval"] = r.k_interval ? to_json(*r.k_interval) : json(nullptr);
    j["feasibility"] = r.feasibility ? to_json(*r.feasibility) : json(nullptr);
    j["goal_reached_time"] = optional_number(r.goal_reached_time);
    j["safety_violated_time"] = optional_number(r.safety_violated_time);
    j["h_at_tf"] = optional_number(r.h_at_tf);
    j["min_b"] = optional_number(r.min_barrier);
    j["control_bound_max_violation"] = number(r.control_bound_max_violation);
    j["qp_relaxed_count"] = r.qp_relaxed_count;
    j["qp_infeasible_count"] = r.qp_infeasible_count;
    j["qp_iterations"] = r.qp_iterations;
    j["envelope_max_ratio"] = optional_number(r.envelope_max_ratio);
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    j["verdict"] = r.verdict ? "pass" : "fail";
    return j;
}

json summary_json(const Scenario& sc, const RunSummary& s)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["scenario"] = s.scenario;
    j["system"] = to_string(sc.system);
    j["bounds"] = {{"u_min", vector_json(sc.bounds.u_min)}, {"u_max", vector_json(sc.bounds.u_max)}};
    j["t_f"] = sc.t_f;
    j["horizon"] = sc.sim.horizon;
    j["dt"] = sc.sim.dt;
    j["substeps"] = sc.sim.substeps;
    if (sc.random_init) {
        j["seed"] = sc.random_init->seed;
    }
    j["thresholds"] = {{"min_b", s.thresholds.min_barrier},
                       {"control_bound_violation", s.thresholds.bound_violation},
                       {"envelope", s.thresholds.envelope}};
    j["runs"] = json::array();
    std::size_t passed = 0;
    for (const auto& r : s.runs) {
        j["runs"].push_back(to_json(r));
        passed += r.verdict;
    }
    j["counts"] = {{"runs", s.runs.size()}, {"passed", passed}, {"failed", s.runs.size() - passed}};
    j["verdict"] = s.verdict ? "pass" : "fail";
    return j;
}

std::string csv_header(const Scenario& sc, const TrajectoryLog& log)
{
    const SystemModel sys = sc.model();
    std::string h = "t";
    for (int i = 1; i <= sys.state_dim(); ++i) {
        h += ",x" + std::to_string(i);
    }
    for (int j = 1; j <= sys.control_dim(); ++j) {
        h += ",u" + std::to_string(j);
    }
    for (const auto& name : log.value_names) {
        h += "," + name;
    }
    h += ",qp_status,slack_total";
    return h;
}

void export_results(const Scenario& sc, const BatchResult& batch, const std::filesystem::path& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
    }

    for (std::size_t r = 0; r < batch.logs.size(); ++r) {
        const TrajectoryLog& log = batch.logs[r];
        if (log.times.empty()) {
            continue;  // failed run; the summary carries the error
        }
        const auto path = out_dir / ("run_" + std::to_string(batch.summary.runs[r].index) + ".csv");
        auto out = open_out(path);
        out << csv_header(sc, log) << '\n';
        for (std::size_t i = 0; i < log.times.size(); ++i) {
            // The final sample repeats the control held over the last interval.
            const std::size_t c = std::min(i, log.controls.size() - 1);
            out << format_number(log.times[i]);
            for (Eigen::Index k = 0; k < log.states[i].size(); ++k) {
                out << ',' << format_number(log.states[i][k]);
            }
            for (Eigen::Index k = 0; k < log.controls[c].size(); ++k) {
                out << ',' << format_number(log.controls[c][k]);
            }
            for (double v : log.values[i]) {
                out << ',' << format_number(v);
            }
            out << ',' << to_string(log.qp_statuses[c]) << ',' << format_number(log.slack_totals[c]) << '\n';
        }
        close_out(out, path);
    }

    {
        const auto path = out_dir / "summary.json";
        auto out = open_out(path);
        out << summary_json(sc, batch.summary).dump(2) << '\n';
        close_out(out, path);
    }

    {
        const auto path = out_dir / "plotdata_trajectories.csv";
        auto out = open_out(path);
        const int n = sc.model().state_dim();
        out << "run,controller,t";
        for (int i = 1; i <= n; ++i) {
            out << ",x" << i;
        }
        out << '\n';
        for (std::size_t r = 0; r < batch.logs.size(); ++r) {
            const TrajectoryLog& log = batch.logs[r];
            for (std::size_t i = 0; i < log.times.size(); ++i) {
                out << batch.summary.runs[r].index << ',' << log.controller << ',' << format_number(log.times[i]);
                for (Eigen::Index k = 0; k < log.states[i].size(); ++k) {
                    out << ',' << format_number(log.states[i][k]);
                }
                out << '\n';
            }
        }
        close_out(out, path);
    }

    {
        const auto path = out_dir / "plotdata_geometry.csv";
        auto out = open_out(path);
        out << "kind,index,cx,cy,radius\n";
        if (sc.goal) {
            out << "goal,0," << format_number(sc.goal->center[0]) << ',' << format_number(sc.goal->center[1]) << ','
                << format_number(sc.goal->radius) << '\n';
        }
        for (std::size_t i = 0; i < sc.obstacles.size(); ++i) {
            const Disk& d = sc.obstacles[i];
            out << "obstacle," << i + 1 << ',' << format_number(d.center[0]) << ',' << format_number(d.center[1])
                << ',' << format_number(d.radius) << '\n';
        }
        close_out(out, path);
    }
}

}  // namespace fccbf
