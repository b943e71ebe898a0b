#include "fccbf/bench.hpp"

#include "fccbf/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fccbf {

using nlohmann::json;

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> col(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    }
};

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

CsvTable read_csv(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw std::runtime_error("cannot read " + p.string());
    }
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(p.string() + ": empty file");
    }
    t.header = split(line);
    while (std::getline(in, line)) {
        if (!line.empty()) {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

double json_number(const json& j)
{
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (s == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

bool close(double a, double b)
{
    // CSV values carry 12 significant digits.
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

VerifyReport verify_outputs(const std::filesystem::path& out_dir)
{
    VerifyReport rep;
    const auto summary_path = out_dir / "summary.json";
    std::ifstream in(summary_path);
    if (!in) {
        throw ConfigError("cannot read " + summary_path.string());
    }
    json summary;
    try {
        summary = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(summary_path.string() + ": " + e.what());
    }

    const double dt = summary.at("dt").get<double>();
    const double horizon = summary.at("horizon").get<double>();
    const double t_f = summary.at("t_f").get<double>();
    Eigen::VectorXd u_min(summary.at("bounds").at("u_min").size());
    Eigen::VectorXd u_max(u_min.size());
    for (Eigen::Index j = 0; j < u_min.size(); ++j) {
        u_min[j] = json_number(summary["bounds"]["u_min"][j]);
        u_max[j] = json_number(summary["bounds"]["u_max"][j]);
    }
    const ControlBounds bounds(u_min, u_max);
    Thresholds th;
    th.min_barrier = summary.at("thresholds").at("min_b").get<double>();
    th.bound_violation = summary.at("thresholds").at("control_bound_violation").get<double>();
    th.envelope = summary.at("thresholds").at("envelope").get<double>();

    const auto expected_rows = static_cast<std::size_t>(std::llround(horizon / dt)) + 1;
    const auto tf_row = static_cast<std::size_t>(std::llround(t_f / dt));
    bool all_pass = true;

    for (const auto& run : summary.at("runs")) {
        const auto idx = run.at("index").get<std::size_t>();
        const std::string tag = "run " + std::to_string(idx);
        const auto fail = [&](const std::string& msg) { rep.failures.push_back(tag + ": " + msg); };
        const bool claimed_pass = run.at("verdict") == "pass";
        all_pass = all_pass && claimed_pass;

        if (run.contains("error")) {
            rep.notes.push_back(tag + ": run failed: " + run["error"].get<std::string>());
            continue;
        }
        const auto csv_path = out_dir / ("run_" + std::to_string(idx) + ".csv");
        CsvTable t;
        try {
            t = read_csv(csv_path);
        } catch (const std::exception& e) {
            fail(e.what());
            continue;
        }
        ++rep.runs_checked;

        if (t.rows.size() != expected_rows) {
            fail("expected " + std::to_string(expected_rows) + " rows, found " + std::to_string(t.rows.size()));
            continue;
        }
        const auto status_col = t.col("qp_status");
        const auto t_col = t.col("t");
        if (!status_col || !t_col) {
            fail("missing t or qp_status column");
            continue;
        }

        RunResult r;
        r.controller = run.at("controller").get<std::string>();
        const int q = static_cast<int>(u_min.size());
        std::vector<std::size_t> barrier_cols;
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            if (t.header[c].rfind("b_", 0) == 0) {
                barrier_cols.push_back(c);
            }
        }
        const auto h_col = t.col("h");
        const auto v_col = t.col("V");
        double min_b = std::numeric_limits<double>::infinity();
        double envelope = -std::numeric_limits<double>::infinity();
        const double k = run.at("parameters").contains("k") ? run["parameters"]["k"].get<double>() : 0.0;
        double v0 = 0.0;

        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& row = t.rows[i];
            if (row.size() != t.header.size()) {
                fail("row " + std::to_string(i) + " has " + std::to_string(row.size()) + " cells");
                break;
            }
            const double ti = std::stod(row[*t_col]);
            if (!close(ti, static_cast<double>(i) * dt)) {
                fail("row " + std::to_string(i) + ": time " + row[*t_col] + " off the dt grid");
            }
            QpStatus st;
            try {
                st = qp_status_from_string(row[*status_col]);
            } catch (const ConfigError&) {
                fail("row " + std::to_string(i) + ": bad qp_status '" + row[*status_col] + "'");
                continue;
            }
            // The last row repeats the final interval; count intervals only.
            if (i + 1 < t.rows.size()) {
                Eigen::VectorXd u(q);
                for (int j = 0; j < q; ++j) {
                    u[j] = std::stod(row[*t.col("u" + std::to_string(j + 1))]);
                }
                r.control_bound_max_violation = std::max(r.control_bound_max_violation, bounds.max_violation(u));
                r.qp_relaxed_count += st == QpStatus::relaxed;
                r.qp_infeasible_count += st == QpStatus::infeasible_hard;
            }
            for (std::size_t c : barrier_cols) {
                min_b = std::min(min_b, std::stod(row[c]));
            }
            if (v_col && r.controller == "fccbf") {
                const double v = std::stod(row[*v_col]);
                if (i == 0) {
                    v0 = v;
                }
                envelope = std::max(envelope, v / (v0 * std::exp(-k * ti)));
            }
        }
        if (!barrier_cols.empty()) {
            r.min_barrier = min_b;
        }
        if (h_col) {
            r.h_at_tf = std::stod(t.rows[tf_row][*h_col]);
        }
        if (r.controller == "fccbf") {
            r.envelope_max_ratio = envelope;
        }

        const auto check = [&](const char* key, const std::optional<double>& recomputed) {
            const json& claimed = run.at(key);
            if (claimed.is_null() != !recomputed.has_value()) {
                fail(std::string(key) + " presence differs from CSV");
            } else if (recomputed && !close(json_number(claimed), *recomputed)) {
                fail(std::string(key) + " = " + claimed.dump() + " but CSV gives " + format_number(*recomputed));
            }
        };
        check("h_at_tf", r.h_at_tf);
        check("min_b", r.min_barrier);
        check("envelope_max_ratio", r.envelope_max_ratio);
        check("control_bound_max_violation", r.control_bound_max_violation);
        if (run.at("qp_relaxed_count").get<long>() != r.qp_relaxed_count) {
            fail("qp_relaxed_count differs from CSV");
        }
        if (run.at("qp_infeasible_count").get<long>() != r.qp_infeasible_count) {
            fail("qp_infeasible_count differs from CSV");
        }

        const bool recomputed_pass = run_verdict(r, th);
        if (recomputed_pass != claimed_pass) {
            fail(std::string("verdict mismatch: summary says ") + (claimed_pass ? "pass" : "fail") +
                 ", CSV gives " + (recomputed_pass ? "pass" : "fail"));
        }
        if (!recomputed_pass) {
            fail("verdict fail (bounds, safety, deadline or envelope)");
        }
    }

    if ((summary.at("verdict") == "pass") != all_pass) {
        rep.failures.push_back("summary verdict inconsistent with per-run verdicts");
    }
    return rep;
}

}  // namespace fccbf
