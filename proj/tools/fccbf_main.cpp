// fccbf: design, run, and verify finite-time convergent CBF scenarios.

#include "fccbf/bench.hpp"
#include "fccbf/errors.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

std::string fmt_state(const Eigen::VectorXd& x)
{
    std::string s = "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        s += (i ? ", " : "") + fccbf::format_number(x[i]);
    }
    return s + ")";
}

std::string fmt_opt(const std::optional<double>& v)
{
    return v ? fccbf::format_number(*v) : "-";
}

int cmd_run(const std::string& path, const std::string& out_dir, const fccbf::ScenarioOverrides& ov)
{
    const fccbf::Scenario sc = fccbf::load_scenario(path, ov);
    const fccbf::BatchResult batch = fccbf::run_batch(sc);
    fccbf::export_results(sc, batch, out_dir);

    for (const auto& r : batch.summary.runs) {
        std::printf("run %zu [%s] x0=%s goal_t=%s h(t_f)=%s min_b=%s relaxed=%ld %s%s%s\n", r.index,
                    r.controller.c_str(), fmt_state(r.x0).c_str(), fmt_opt(r.goal_reached_time).c_str(),
                    fmt_opt(r.h_at_tf).c_str(), fmt_opt(r.min_barrier).c_str(), r.qp_relaxed_count,
                    r.verdict ? "PASS" : "FAIL", r.error.empty() ? "" : " error: ", r.error.c_str());
    }
    std::printf("%zu runs, verdict %s, output in %s\n", batch.summary.runs.size(),
                batch.summary.verdict ? "PASS" : "FAIL", out_dir.c_str());
    return batch.summary.verdict ? kExitPass : kExitFail;
}

int cmd_design(const std::string& path, const fccbf::ScenarioOverrides& ov)
{
    const fccbf::Scenario sc = fccbf::load_scenario(path, ov);
    bool ok = true;
    for (const auto& plan : sc.plans) {
        if (!plan.k_interval) {
            continue;
        }
        const auto& iv = *plan.k_interval;
        const auto& f = std::get<fccbf::FccbfSpec>(plan.controller.goal);
        std::printf("plan %zu x0=%s r=%s k=%s\n", plan.index, fmt_state(plan.x0).c_str(),
                    fccbf::format_number(f.r).c_str(), fccbf::format_number(f.k).c_str());
        std::printf("  k-interval [%s, %s] %s\n", fccbf::format_number(iv.k_min).c_str(),
                    fccbf::format_number(iv.k_max).c_str(), iv.nonempty ? "nonempty" : "EMPTY");
        if (plan.feasibility) {
            const auto& rep = *plan.feasibility;
            std::printf("  validity (%s, %zu states): decoupled=%s pointwise=%s margin=%s worst=%s\n",
                        fccbf::to_string(rep.mode), rep.n_samples, rep.decoupled_pass ? "pass" : "fail",
                        rep.pointwise_pass ? "pass" : "fail", fccbf::format_number(rep.margin).c_str(),
                        fmt_state(rep.worst_state).c_str());
            ok = ok && rep.pointwise_pass;
        }
        ok = ok && iv.nonempty;
    }
    return ok ? kExitPass : kExitFail;
}

int cmd_verify(const std::string& dir)
{
    const fccbf::VerifyReport rep = fccbf::verify_outputs(dir);
    for (const auto& n : rep.notes) {
        std::printf("note: %s\n", n.c_str());
    }
    for (const auto& f : rep.failures) {
        std::printf("FAIL: %s\n", f.c_str());
    }
    std::printf("%zu runs checked, %s\n", rep.runs_checked, rep.ok() ? "all invariants hold" : "violations found");
    return rep.ok() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Finite-time convergent control barrier functions: design, simulate, verify"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;

    auto* run = app.add_subcommand("run", "simulate every run of a scenario and export CSV/JSON");
    run->add_option("scenario", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "override init.random.seed");
    run->add_option("--dt", dt, "override the control interval in seconds");

    auto* design = app.add_subcommand("design", "print the feasible k-interval and validity report");
    design->add_option("scenario", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
    design->add_option("--seed", seed, "override init.random.seed");

    std::string verify_dir;
    auto* verify = app.add_subcommand("verify", "re-check invariants on an output directory");
    verify->add_option("out", verify_dir, "directory written by `fccbf run`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        const fccbf::ScenarioOverrides ov{seed, dt};
        if (*run) {
            return cmd_run(scenario_path, out_dir, ov);
        }
        if (*design) {
            return cmd_design(scenario_path, ov);
        }
        return cmd_verify(verify_dir);
    } catch (const fccbf::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const fccbf::DomainError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFail;
    }
}
