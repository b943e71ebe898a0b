#pragma once

#include "fccbf/design.hpp"
#include "fccbf/model.hpp"
#include "fccbf/sim.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fccbf {

inline constexpr int kSchemaVersion = 1;

enum class SystemKind { single_integrator_2d, double_integrator_1d };

const char* to_string(SystemKind k);

struct Disk {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double radius = 1.0;
};

/// One goal formulation as written in the scenario file. Unset optionals mean
/// "auto" and are resolved per initial state.
struct GoalControllerSpec {
    enum class Kind { fccbf, clbf, safety_only };
    Kind kind = Kind::fccbf;
    std::optional<double> r;
    std::optional<double> k;
    std::optional<double> p;
    double q_exp = 1.0 / 3.0;

    std::string label() const;
};

struct RandomInit {
    int count = 0;
    std::uint64_t seed = 0;
    StateBox region;
    // Obstacle and goal disks are grown by this much before rejection.
    double inflation = 0.1;
    // Also reject starts whose straight segment to the goal center passes
    // within an inflated obstacle.
    bool require_clear_path = false;
};

struct DesignSettings {
    // Declares that the worst case of the validity test over R(x0) sits at
    // x0, enabling the initial-state fast path.
    bool monotone_worst_case = false;
    std::size_t n_samples = kDefaultValiditySamples;
    std::uint64_t seed = 0;
    std::optional<StateBox> bounding_box;
    // Auto r = r_fraction * R^2.
    double r_fraction = 0.25;
};

/// A fully resolved closed-loop run: initial state plus concrete controller.
struct RunPlan {
    std::size_t index = 0;
    std::size_t init_index = 0;
    StateVector x0;
    ControllerSpec controller;
    std::optional<KInterval> k_interval;
    std::optional<FeasibilityReport> feasibility;
};

struct Scenario {
    int schema_version = kSchemaVersion;
    std::string name;
    SystemKind system = SystemKind::single_integrator_2d;
    std::optional<Disk> goal;
    std::vector<Disk> obstacles;
    std::vector<double> lower_limits;  // double integrator only
    std::vector<double> safety_slopes{2.0};
    ControlBounds bounds;
    std::vector<GoalControllerSpec> controllers;
    double t_f = 6.0;
    std::vector<StateVector> fixed_init;
    std::optional<RandomInit> random_init;
    SimConfig sim;
    DesignSettings design;

    // Filled by resolve().
    std::vector<StateVector> initial_states;
    std::vector<RunPlan> plans;

    SystemModel model() const;
    std::vector<ConstraintFunction> barriers() const;
    std::optional<ConstraintFunction> goal_function() const;
};

struct ScenarioOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
};

// Parses a scenario document (JSON, comments allowed). Errors name the
// offending field path. Throws ConfigError.
Scenario parse_scenario(const nlohmann::json& doc, const ScenarioOverrides& overrides = {});
Scenario parse_scenario_text(const std::string& text, const ScenarioOverrides& overrides = {});

// Reads, validates, and resolves: draws random initial states, fills "auto"
// controller parameters, and runs the design checks for every FCCBF plan.
Scenario load_scenario(const std::filesystem::path& path, const ScenarioOverrides& overrides = {});

// Generates initial states and run plans. Called by load_scenario.
void resolve(Scenario& sc);

std::vector<StateVector> sample_initial_states(const Scenario& sc, const RandomInit& init);

struct Thresholds {
    double min_barrier = -1e-6;
    double bound_violation = 1e-9;
    double envelope = 1e-3;
};

struct RunResult {
    std::size_t index = 0;
    std::size_t init_index = 0;
    std::string controller;
    StateVector x0;
    nlohmann::json parameters;
    std::optional<KInterval> k_interval;
    std::optional<FeasibilityReport> feasibility;
    std::optional<double> goal_reached_time;
    std::optional<double> safety_violated_time;
    std::optional<double> h_at_tf;
    std::optional<double> min_barrier;
    std::optional<double> envelope_max_ratio;  // max_t V(t) / (V(0) exp(-k t))
    double control_bound_max_violation = 0.0;
    long qp_relaxed_count = 0;
    long qp_infeasible_count = 0;
    long qp_iterations = 0;
    std::string error;
    bool verdict = false;
};

struct RunSummary {
    std::string scenario;
    std::vector<RunResult> runs;
    Thresholds thresholds;
    bool verdict = true;
};

struct BatchResult {
    std::vector<TrajectoryLog> logs;
    RunSummary summary;
};

// FCCBF runs: h(t_f) >= 0, barriers >= min_barrier, bounds, and the
// exponential envelope. CLBF runs are a comparison baseline and are judged on
// bound compliance only. Safety-only runs: barriers and bounds.
bool run_verdict(const RunResult& r, const Thresholds& th);

RunResult summarize_run(const Scenario& sc, const RunPlan& plan, const TrajectoryLog& log, const Thresholds& th);

// Executes every plan with OpenMP, capped by FCCBF_THREADS. Per-run failures
// are recorded in the summary and the batch continues.
BatchResult run_batch(const Scenario& sc, const Thresholds& th = {});

namespace serial {

BatchResult run_batch(const Scenario& sc, const Thresholds& th = {});

}  // namespace serial

// Thread cap from FCCBF_THREADS, defaulting to the OpenMP maximum.
int batch_threads();

nlohmann::json to_json(const KInterval& iv);
nlohmann::json to_json(const FeasibilityReport& rep);
nlohmann::json to_json(const RunResult& r);
nlohmann::json summary_json(const Scenario& sc, const RunSummary& s);

std::string format_number(double v);
std::string csv_header(const Scenario& sc, const TrajectoryLog& log);

// Writes run_<idx>.csv, summary.json, plotdata_trajectories.csv and
// plotdata_geometry.csv. Throws std::runtime_error naming the path on I/O
// failure.
void export_results(const Scenario& sc, const BatchResult& batch, const std::filesystem::path& out_dir);

struct VerifyReport {
    std::vector<std::string> failures;
    std::vector<std::string> notes;
    std::size_t runs_checked = 0;

    bool ok() const { return failures.empty(); }
};

// Re-checks exported CSVs against summary.json: log lengths, status values,
// bound compliance, FCCBF envelope and deadline, and that every summary
// field is reproducible from the CSVs.
VerifyReport verify_outputs(const std::filesystem::path& out_dir);

}  // namespace fccbf
