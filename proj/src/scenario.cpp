#include "fccbf/bench.hpp"

#include "fccbf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace fccbf {

using nlohmann::json;

const char* to_string(SystemKind k)
{
    return k == SystemKind::single_integrator_2d ? "single-integrator-2d" : "double-integrator-1d";
}

std::string GoalControllerSpec::label() const
{
    switch (kind) {
    case Kind::fccbf:
        return "fccbf";
    case Kind::clbf:
        return "clbf";
    case Kind::safety_only:
        return "safety-only";
    }
    return "unknown";
}

namespace {

// Field access with the dotted path kept for error messages.
class Field {
public:
    Field(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

    const json& node() const { return node_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }

    bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

    Field operator[](const char* key) const
    {
        if (!node_.is_object()) {
            fail("expected an object");
        }
        if (!node_.contains(key)) {
            throw ConfigError(child_path(key) + ": required field missing");
        }
        return Field(node_.at(key), child_path(key));
    }

    Field at(std::size_t i) const { return Field(node_.at(i), path_ + "[" + std::to_string(i) + "]"); }

    std::size_t size() const
    {
        if (!node_.is_array()) {
            fail("expected an array");
        }
        return node_.size();
    }

    double number() const
    {
        if (!node_.is_number()) {
            fail("expected a number");
        }
        const double v = node_.get<double>();
        if (!std::isfinite(v)) {
            fail("expected a finite number");
        }
        return v;
    }

    double positive() const
    {
        const double v = number();
        if (!(v > 0.0)) {
            fail("must be positive");
        }
        return v;
    }

    std::int64_t integer() const
    {
        if (!node_.is_number_integer()) {
            fail("expected an integer");
        }
        return node_.get<std::int64_t>();
    }

    std::string string() const
    {
        if (!node_.is_string()) {
            fail("expected a string");
        }
        return node_.get<std::string>();
    }

    bool boolean() const
    {
        if (!node_.is_boolean()) {
            fail("expected true or false");
        }
        return node_.get<bool>();
    }

    // "auto" or a positive number.
    std::optional<double> auto_or_positive() const
    {
        if (node_.is_string() && node_.get<std::string>() == "auto") {
            return std::nullopt;
        }
        if (!node_.is_number()) {
            fail("expected a positive number or \"auto\"");
        }
        return positive();
    }

    Eigen::VectorXd vector(std::optional<std::size_t> length = std::nullopt) const
    {
        const std::size_t n = size();
        if (length && n != *length) {
            fail("expected " + std::to_string(*length) + " entries, got " + std::to_string(n));
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const json& e = node_.at(i);
            // Bounds may be written as "inf" / "-inf".
            if (e.is_string() && (e == "inf" || e == "-inf")) {
                v[static_cast<Eigen::Index>(i)] = e == "inf" ? HUGE_VAL : -HUGE_VAL;
            } else {
                v[static_cast<Eigen::Index>(i)] = at(i).number();
            }
        }
        return v;
    }

private:
    std::string child_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& node_;
    std::string path_;
};

Disk parse_disk(const Field& f)
{
    Disk d;
    d.center = f["center"].vector(2);
    d.radius = f["radius"].positive();
    return d;
}

StateBox parse_box(const Field& f, int dim)
{
    StateBox b{f["lower"].vector(dim), f["upper"].vector(dim)};
    if (!b.lower.allFinite() || !b.upper.allFinite() || (b.upper - b.lower).minCoeff() <= 0.0) {
        f.fail("box must be finite with lower < upper");
    }
    return b;
}

GoalControllerSpec parse_controller(const Field& f)
{
    GoalControllerSpec c;
    const std::string type = f["type"].string();
    if (type == "fccbf") {
        c.kind = GoalControllerSpec::Kind::fccbf;
        c.r = f.has("r") ? f["r"].auto_or_positive() : std::nullopt;
        c.k = f.has("k") ? f["k"].auto_or_positive() : std::nullopt;
    } else if (type == "clbf") {
        c.kind = GoalControllerSpec::Kind::clbf;
        c.p = f.has("p") ? f["p"].auto_or_positive() : std::nullopt;
        if (f.has("q_exp")) {
            c.q_exp = f["q_exp"].number();
            if (!(c.q_exp > 0.0 && c.q_exp < 1.0)) {
                f["q_exp"].fail("must lie in (0, 1)");
            }
        }
    } else if (type == "safety-only") {
        c.kind = GoalControllerSpec::Kind::safety_only;
    } else {
        f["type"].fail("expected \"fccbf\", \"clbf\" or \"safety-only\"");
    }
    return c;
}

double segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p)
{
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

}  // namespace

SystemModel Scenario::model() const
{
    return system == SystemKind::single_integrator_2d ? models::single_integrator_2d()
                                                      : models::double_integrator_1d();
}

std::vector<ConstraintFunction> Scenario::barriers() const
{
    std::vector<ConstraintFunction> out;
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        out.push_back(constraints::disk_exterior("b_" + std::to_string(i + 1), obstacles[i].center,
                                                 obstacles[i].radius));
    }
    for (std::size_t i = 0; i < lower_limits.size(); ++i) {
        out.push_back(constraints::position_lower_limit("b_" + std::to_string(obstacles.size() + i + 1),
                                                        lower_limits[i]));
    }
    return out;
}

std::optional<ConstraintFunction> Scenario::goal_function() const
{
    if (!goal) {
        return std::nullopt;
    }
    return constraints::disk_interior("h", goal->center, goal->radius);
}

Scenario parse_scenario(const json& doc, const ScenarioOverrides& overrides)
{
    const Field root(doc, "");
    if (!doc.is_object()) {
        throw ConfigError("scenario: top level must be an object");
    }
    Scenario sc;
    sc.schema_version = static_cast<int>(root["schema_version"].integer());
    if (sc.schema_version != kSchemaVersion) {
        root["schema_version"].fail("unsupported version " + std::to_string(sc.schema_version));
    }
    sc.name = root.has("name") ? root["name"].string() : "scenario";

    const std::string system = root["system"].string();
    if (system == "single-integrator-2d") {
        sc.system = SystemKind::single_integrator_2d;
    } else if (system == "double-integrator-1d") {
        sc.system = SystemKind::double_integrator_1d;
    } else {
        root["system"].fail("expected \"single-integrator-2d\" or \"double-integrator-1d\"");
    }
    const SystemModel sys = sc.model();
    const int n = sys.state_dim();
    const int q = sys.control_dim();

    if (root.has("goal") && !doc.at("goal").is_null()) {
        if (sc.system != SystemKind::single_integrator_2d) {
            root["goal"].fail("goal disks need the 2D single integrator (relative degree 1)");
        }
        sc.goal = parse_disk(root["goal"]);
    }
    if (root.has("obstacles")) {
        const Field obs = root["obstacles"];
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (sc.system != SystemKind::single_integrator_2d) {
                obs.fail("disk obstacles need the 2D single integrator");
            }
            sc.obstacles.push_back(parse_disk(obs.at(i)));
        }
    }
    if (root.has("lower_limits")) {
        if (sc.system != SystemKind::double_integrator_1d) {
            root["lower_limits"].fail("only valid for double-integrator-1d");
        }
        const Eigen::VectorXd lim = root["lower_limits"].vector();
        sc.lower_limits.assign(lim.data(), lim.data() + lim.size());
    }
    if (root.has("safety_slopes")) {
        const Eigen::VectorXd s = root["safety_slopes"].vector();
        sc.safety_slopes.assign(s.data(), s.data() + s.size());
    } else if (sc.system == SystemKind::double_integrator_1d) {
        sc.safety_slopes = {1.0, 1.0};
    }
    const std::size_t expected_slopes = sc.system == SystemKind::single_integrator_2d ? 1 : 2;
    if (sc.safety_slopes.size() != expected_slopes) {
        throw ConfigError("safety_slopes: expected " + std::to_string(expected_slopes) +
                          " entries (one per relative-degree order)");
    }
    for (double a : sc.safety_slopes) {
        if (!(a > 0.0)) {
            throw ConfigError("safety_slopes: class-K slopes must be positive");
        }
    }

    {
        const Field b = root["bounds"];
        try {
            sc.bounds = ControlBounds(b["u_min"].vector(q), b["u_max"].vector(q));
        } catch (const ConfigError& e) {
            b.fail(e.what());
        }
    }

    const Field ctrl = root["controller"];
    if (ctrl.node().is_array()) {
        for (std::size_t i = 0; i < ctrl.size(); ++i) {
            sc.controllers.push_back(parse_controller(ctrl.at(i)));
        }
        if (sc.controllers.empty()) {
            ctrl.fail("at least one controller is required");
        }
    } else {
        sc.controllers.push_back(parse_controller(ctrl));
    }
    for (const auto& c : sc.controllers) {
        if (c.kind != GoalControllerSpec::Kind::safety_only && !sc.goal) {
            ctrl.fail(c.label() + " controller needs a goal");
        }
    }

    sc.t_f = root["t_f"].positive();

    const Field init = root["init"];
    if (init.has("fixed")) {
        const Field fx = init["fixed"];
        if (fx.size() > 0 && fx.node().at(0).is_array()) {
            for (std::size_t i = 0; i < fx.size(); ++i) {
                sc.fixed_init.push_back(fx.at(i).vector(n));
            }
        } else {
            sc.fixed_init.push_back(fx.vector(n));
        }
    }
    if (init.has("random")) {
        const Field rnd = init["random"];
        RandomInit ri;
        const auto count = rnd["count"].integer();
        if (count < 0) {
            rnd["count"].fail("must be >= 0");
        }
        ri.count = static_cast<int>(count);
        const auto seed = rnd["seed"].integer();
        if (seed < 0) {
            rnd["seed"].fail("must be >= 0");
        }
        ri.seed = static_cast<std::uint64_t>(seed);
        ri.region = parse_box(rnd["region"], n);
        if (rnd.has("inflation")) {
            ri.inflation = rnd["inflation"].number();
            if (ri.inflation < 0.0) {
                rnd["inflation"].fail("must be >= 0");
            }
        }
        if (rnd.has("require_clear_path")) {
            ri.require_clear_path = rnd["require_clear_path"].boolean();
        }
        if (ri.require_clear_path && !sc.goal) {
            rnd["require_clear_path"].fail("needs a goal");
        }
        sc.random_init = ri;
    }
    if (!init.has("fixed") && !init.has("random")) {
        init.fail("expected \"fixed\" or \"random\"");
    }

    const Field sim = root["sim"];
    sc.sim.dt = sim.has("dt") ? sim["dt"].positive() : 0.01;
    sc.sim.horizon = root.has("horizon") ? root["horizon"].positive() : sc.t_f;
    sc.sim.substeps = sim.has("substeps") ? static_cast<int>(sim["substeps"].integer()) : 1;
    if (sim.has("constraint_tol")) {
        sc.sim.constraint_tol = sim["constraint_tol"].number();
    }
    if (sim.has("event_tol")) {
        sc.sim.event_tol = sim["event_tol"].positive();
    }

    if (root.has("design")) {
        const Field d = root["design"];
        if (d.has("monotone_worst_case")) {
            sc.design.monotone_worst_case = d["monotone_worst_case"].boolean();
        }
        if (d.has("n_samples")) {
            const auto ns = d["n_samples"].integer();
            if (ns < 1) {
                d["n_samples"].fail("must be >= 1");
            }
            sc.design.n_samples = static_cast<std::size_t>(ns);
        }
        if (d.has("seed")) {
            sc.design.seed = static_cast<std::uint64_t>(d["seed"].integer());
        }
        if (d.has("bounding_box")) {
            sc.design.bounding_box = parse_box(d["bounding_box"], n);
        }
        if (d.has("r_fraction")) {
            sc.design.r_fraction = d["r_fraction"].positive();
        }
    }

    if (overrides.seed && sc.random_init) {
        sc.random_init->seed = *overrides.seed;
    }
    if (overrides.dt) {
        if (!(*overrides.dt > 0.0)) {
            throw ConfigError("--dt must be positive");
        }
        sc.sim.dt = *overrides.dt;
    }

    try {
        sc.sim.steps();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("sim: ") + e.what());
    }
    if (sc.t_f > sc.sim.horizon + 1e-12) {
        root["t_f"].fail("must not exceed horizon");
    }
    return sc;
}

Scenario parse_scenario_text(const std::string& text, const ScenarioOverrides& overrides)
{
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario: parse error: ") + e.what());
    }
    Scenario sc = parse_scenario(doc, overrides);
    resolve(sc);
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path, const ScenarioOverrides& overrides)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario_text(buf.str(), overrides);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<StateVector> sample_initial_states(const Scenario& sc, const RandomInit& init)
{
    const auto goal = sc.goal_function();
    const auto barriers = sc.barriers();
    std::mt19937_64 rng(init.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<StateVector> out;
    const std::size_t max_draws = 100000 + 1000 * static_cast<std::size_t>(init.count);
    StateVector x(init.region.lower.size());
    for (std::size_t draw = 0; static_cast<int>(out.size()) < init.count; ++draw) {
        if (draw >= max_draws) {
            throw ConfigError("init.random: could not find " + std::to_string(init.count) +
                              " admissible initial states in the region");
        }
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x[i] = init.region.lower[i] + (init.region.upper[i] - init.region.lower[i]) * unit(rng);
        }
        if (sc.goal && (x.head<2>() - sc.goal->center).norm() <= sc.goal->radius + init.inflation) {
            continue;
        }
        bool clear = true;
        for (const auto& d : sc.obstacles) {
            if ((x.head<2>() - d.center).norm() <= d.radius + init.inflation) {
                clear = false;
                break;
            }
        }
        for (const auto& b : barriers) {
            if (!(b(x) > 0.0)) {
                clear = false;
            }
        }
        if (clear && init.require_clear_path) {
            for (const auto& d : sc.obstacles) {
                if (segment_distance(x.head<2>(), sc.goal->center, d.center) <= d.radius + init.inflation) {
                    clear = false;
                    break;
                }
            }
        }
        if (clear && goal && !((*goal)(x) < 0.0)) {
            clear = false;
        }
        if (clear) {
            out.push_back(x);
        }
    }
    return out;
}

namespace {

StateBox default_reach_box(const Disk& goal, double h0)
{
    // h(y) >= h0 is the disk of radius sqrt(R^2 - h0) about the goal center.
    const double rho = std::sqrt(goal.radius * goal.radius - h0);
    StateBox box;
    box.lower = (goal.center.array() - rho).matrix();
    box.upper = (goal.center.array() + rho).matrix();
    return box;
}

std::string describe(const StateVector& x)
{
    std::ostringstream os;
    os << "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        os << (i ? ", " : "") << x[i];
    }
    os << ")";
    return os.str();
}

}  // namespace

void resolve(Scenario& sc)
{
    const SystemModel sys = sc.model();
    sc.initial_states = sc.fixed_init;
    if (sc.random_init) {
        auto drawn = sample_initial_states(sc, *sc.random_init);
        sc.initial_states.insert(sc.initial_states.end(), drawn.begin(), drawn.end());
    }

    std::vector<HocbfSpec> safety;
    for (const auto& b : sc.barriers()) {
        safety.push_back({b, sc.safety_slopes});
    }
    const auto goal = sc.goal_function();

    sc.plans.clear();
    for (std::size_t i = 0; i < sc.initial_states.size(); ++i) {
        const StateVector& x0 = sc.initial_states[i];
        const std::string where = "init[" + std::to_string(i) + "] " + describe(x0);
        for (const auto& b : safety) {
            if (!(b.constraint(x0) > 0.0)) {
                throw ConfigError(where + ": inside obstacle " + b.constraint.tag);
            }
        }
        if (goal && !((*goal)(x0) < 0.0)) {
            throw ConfigError(where + ": already inside the goal set (h(x0) >= 0)");
        }

        for (const auto& gc : sc.controllers) {
            RunPlan plan;
            plan.index = sc.plans.size();
            plan.init_index = i;
            plan.x0 = x0;
            plan.controller.safety = safety;
            plan.controller.hessian = Eigen::MatrixXd::Identity(sys.control_dim(), sys.control_dim());

            if (gc.kind == GoalControllerSpec::Kind::fccbf) {
                const double h0 = (*goal)(x0);
                FccbfSpec spec{*goal, gc.r.value_or(sc.design.r_fraction * sc.goal->radius * sc.goal->radius), 1.0,
                               sc.t_f};
                std::vector<StateVector> samples;
                KInterval iv;
                if (sc.design.monotone_worst_case) {
                    iv = feasible_k_interval(spec, sys, sc.bounds, x0);
                } else {
                    const StateBox box = sc.design.bounding_box.value_or(default_reach_box(*sc.goal, h0));
                    samples = reachable_set(*goal, x0).sample(box, sc.design.n_samples, sc.design.seed + i);
                    samples.insert(samples.begin(), x0);
                    iv.k_min = k_lower_bound(spec.r, h0, spec.t_f);
                    iv.k_max = k_upper_bound_sampled(spec, sys, sc.bounds, samples);
                    iv.nonempty = iv.k_min <= iv.k_max && iv.k_max > 0.0;
                }
                if (gc.k) {
                    spec.k = *gc.k;
                } else {
                    if (!iv.nonempty) {
                        throw ConfigError(where + ": empty k-interval [" + std::to_string(iv.k_min) + ", " +
                                          std::to_string(iv.k_max) + "] for r = " + std::to_string(spec.r));
                    }
                    spec.k = std::isfinite(iv.k_max) ? iv.midpoint() : 2.0 * iv.k_min;
                }
                if (!finite_time_condition(spec.r, spec.k, h0, spec.t_f)) {
                    throw ConfigError(where + ": k = " + std::to_string(spec.k) + " is below the finite-time bound " +
                                      std::to_string(iv.k_min));
                }
                plan.k_interval = iv;
                plan.feasibility = sc.design.monotone_worst_case
                                       ? check_validity_initial(spec, sys, sc.bounds, x0)
                                       : check_validity_on(spec, sys, sc.bounds, samples);
                plan.controller.goal = spec;
            } else if (gc.kind == GoalControllerSpec::Kind::clbf) {
                const double h0 = (*goal)(x0);
                ClbfSpec spec{*goal, gc.p.value_or(clbf_gain(h0, gc.q_exp, sc.t_f)), gc.q_exp};
                plan.controller.goal = spec;
            }
            validate_run(plan.controller, sys, sc.bounds, x0, sc.sim);
            sc.plans.push_back(std::move(plan));
        }
    }
}

}  // namespace fccbf
