#include "fccbf/design.hpp"
#include "fccbf/errors.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

using namespace fccbf;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

ConstraintFunction goal_disk() { return constraints::disk_interior("h", Eigen::Vector2d::Zero(), 1.0); }

const ControlBounds kBox = ControlBounds::symmetric(Eigen::Vector2d(2.0, 2.0));

StateBox quadrant_box(double extent) { return {vec({-extent, -extent}), vec({0.0, 0.0})}; }

}  // namespace

TEST_CASE("k lower bound closed forms")
{
    CHECK(k_lower_bound(1.0, -1.0, 6.0) == doctest::Approx(std::log(2.0) / 6.0));
    CHECK(k_lower_bound(1.0, -1.0, 6.0) == doctest::Approx(0.11552).epsilon(1e-4));
    CHECK(k_lower_bound(1.0, -17.0, 6.0) == doctest::Approx(std::log(18.0) / 6.0));
    CHECK(k_lower_bound(1.0, -17.0, 6.0) == doctest::Approx(0.48173).epsilon(1e-5));
    CHECK(k_lower_bound(1.0, -1e-12, 6.0) < 1e-12);
    CHECK_THROWS_AS(k_lower_bound(0.0, -1.0, 6.0), DomainError);
    CHECK_THROWS_AS(k_lower_bound(1.0, 0.5, 6.0), DomainError);
}

TEST_CASE("k lower bound decreases in r")
{
    for (double h0 : {-0.5, -3.0, -17.0, -40.0}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double r = 0.05; r <= 5.0; r += 0.05) {
            const double k = k_lower_bound(r, h0, 6.0);
            CHECK(k < prev);
            prev = k;
        }
    }
}

TEST_CASE("k upper bound at the initial state")
{
    const auto sys = models::single_integrator_2d();
    const FccbfSpec spec{goal_disk(), 1.0, 1.0, 6.0};
    CHECK(k_upper_bound_initial(spec, sys, kBox, vec({-3, -3})) == doctest::Approx(4.0 / 3.0));

    const auto iv = feasible_k_interval(spec, sys, kBox, vec({-3, -3}));
    CHECK(iv.nonempty);
    CHECK(std::abs(iv.k_min - std::log(18.0) / 6.0) <= 1e-9);
    CHECK(std::abs(iv.k_max - 4.0 / 3.0) <= 1e-9);

    CHECK(std::isinf(k_upper_bound_initial(spec, sys, ControlBounds::unbounded(2), vec({-3, -3}))));
}

TEST_CASE("small bounds empty the interval")
{
    const auto sys = models::single_integrator_2d();
    const FccbfSpec spec{goal_disk(), 1.0, 1.0, 6.0};
    const auto iv = feasible_k_interval(spec, sys, ControlBounds::symmetric(Eigen::Vector2d(0.5, 0.5)), vec({-3, -3}));
    CHECK(iv.k_max == doctest::Approx(1.0 / 3.0));
    CHECK_FALSE(iv.nonempty);
}

TEST_CASE("short deadline empties the interval")
{
    const auto sys = models::single_integrator_2d();
    const auto iv = feasible_k_interval({goal_disk(), 1.0, 1.0, 1e-3}, sys, kBox, vec({-3, -3}));
    CHECK(iv.k_min > 1000.0);
    CHECK_FALSE(iv.nonempty);
}

TEST_CASE("no control authority gives k_max = 0")
{
    ConstraintFunction flat{"h", [](const StateVector&) { return -5.0; },
                            [](const StateVector& x) { return RowVector::Zero(x.size()); }};
    const auto sys = models::single_integrator_2d();
    const FccbfSpec spec{flat, 1.0, 1.0, 6.0};
    CHECK(k_upper_bound_initial(spec, sys, kBox, vec({1, 1})) == 0.0);
    CHECK_FALSE(feasible_k_interval(spec, sys, kBox, vec({1, 1})).nonempty);
}

TEST_CASE("reachable set membership")
{
    const auto reach = reachable_set(goal_disk(), vec({-3, -3}));
    CHECK(reach.h_lower == doctest::Approx(-17.0));
    CHECK(reach.h_upper == 0.0);
    CHECK(reach.contains(vec({-3, -3})));
    CHECK_FALSE(reach.contains(vec({0, 0})));
    CHECK(reach.contains(vec({1, 0})));
    CHECK(reach.contains(vec({0, std::sqrt(18.0)})));
    CHECK_FALSE(reach.contains(vec({0, 4.3})));
    CHECK_THROWS_AS(reachable_set(goal_disk(), vec({0.2, 0.1})), DomainError);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-5, 5);
    for (int i = 0; i < 200; ++i) {
        const StateVector y = vec({d(rng), d(rng)});
        const double r2 = y.squaredNorm();
        CHECK(reach.contains(y) == (r2 >= 1.0 && r2 <= 18.0));
    }
}

TEST_CASE("reachable set sampler is seeded and bounded")
{
    const auto reach = reachable_set(goal_disk(), vec({-3, -3}));
    const auto a = reach.sample(quadrant_box(std::sqrt(18.0)), 500, 42);
    const auto b = reach.sample(quadrant_box(std::sqrt(18.0)), 500, 42);
    REQUIRE(a.size() == 500);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(reach.contains(a[i]));
    }
    // a box that misses R entirely
    const StateBox inside{vec({-0.5, -0.5}), vec({0.5, 0.5})};
    CHECK_THROWS_AS(reach.sample(inside, 10, 1, 5000), DomainError);
}

TEST_CASE("sampled check over the quadrant annulus")
{
    // Over 1 <= |y|^2 <= 18 with y <= 0 the pointwise margin is
    // -k|y|^2 + 4(|y1| + |y2|), smallest on an axis at |y|^2 = 18. The sampled
    // bound is therefore 4/sqrt(18) ~ 0.943, below the fast-path 4/3.
    const auto sys = models::single_integrator_2d();
    const auto reach = reachable_set(goal_disk(), vec({-3, -3}));
    const StateBox box = quadrant_box(std::sqrt(18.0));

    const auto pass = check_validity_sampled({goal_disk(), 1.0, 0.9, 6.0}, sys, kBox, reach, box, 10000, 7);
    CHECK(pass.pointwise_pass);
    CHECK(pass.n_samples == 10000);
    CHECK(pass.margin > 0.0);

    const auto fail = check_validity_sampled({goal_disk(), 1.0, 1.0, 6.0}, sys, kBox, reach, box, 10000, 7);
    CHECK_FALSE(fail.pointwise_pass);
    CHECK_FALSE(fail.decoupled_pass);
    CHECK(fail.worst_state.squaredNorm() > 16.0);
    const double axis_gap = std::min(std::abs(fail.worst_state[0]), std::abs(fail.worst_state[1]));
    CHECK(axis_gap < 0.5);

    const auto over = check_validity_sampled({goal_disk(), 1.0, 1.01 * 4.0 / 3.0, 6.0}, sys, kBox, reach, box,
                                             10000, 7);
    CHECK_FALSE(over.pointwise_pass);
}

TEST_CASE("unbounded control always passes")
{
    const auto sys = models::single_integrator_2d();
    const auto reach = reachable_set(goal_disk(), vec({-3, -3}));
    const auto rep = check_validity_sampled({goal_disk(), 1.0, 50.0, 6.0}, sys, ControlBounds::unbounded(2), reach,
                                            quadrant_box(std::sqrt(18.0)), 2000, 3);
    CHECK(rep.pointwise_pass);
    CHECK(rep.decoupled_pass);
}

TEST_CASE("fast path is tight for starts on an axis")
{
    // For x0 = (-a, 0) the margin -k|y|^2 + 4(|y1| + |y2|) >= -k|y|^2 + 4|y|,
    // which is smallest at |y| = a, so k_max = 4/a is the sampled bound too.
    const auto sys = models::single_integrator_2d();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> radius(1.2, 4.0);
    std::uniform_int_distribution<int> axis(0, 3);
    for (int i = 0; i < 100; ++i) {
        const double a = radius(rng);
        StateVector x0 = vec({0, 0});
        const int ax = axis(rng);
        x0[ax % 2] = ax < 2 ? -a : a;
        const FccbfSpec base{goal_disk(), 0.25, 1.0, 6.0};
        const double k_max = k_upper_bound_initial(base, sys, kBox, x0);
        CHECK(k_max == doctest::Approx(4.0 * a / (a * a - 0.75)));

        const auto reach = reachable_set(goal_disk(), x0);
        const StateBox box{vec({-a, -a}), vec({a, a})};
        auto samples = reach.sample(box, 2000, 1000 + i);
        samples.insert(samples.begin(), x0);
        FccbfSpec below = base;
        below.k = 0.999 * k_max;
        CHECK(check_validity_on(below, sys, kBox, samples).pointwise_pass);
        FccbfSpec above = base;
        above.k = 1.01 * k_max;
        const auto rep = check_validity_on(above, sys, kBox, samples);
        CHECK_FALSE(rep.pointwise_pass);
    }
}

TEST_CASE("fast path is not sound for off-axis starts")
{
    // Counterexample: from (-3, -3) the fast-path bound is 4/3 but the axis
    // points of R(x0) tolerate only 4/sqrt(18).
    const auto sys = models::single_integrator_2d();
    const StateVector x0 = vec({-3, -3});
    const double k_max = k_upper_bound_initial({goal_disk(), 1.0, 1.0, 6.0}, sys, kBox, x0);
    const std::vector<StateVector> axis_points{vec({-std::sqrt(18.0), 0.0})};
    CHECK_FALSE(check_validity_on({goal_disk(), 1.0, 0.999 * k_max, 6.0}, sys, kBox, axis_points).pointwise_pass);
    CHECK(check_validity_initial({goal_disk(), 1.0, 0.999 * k_max, 6.0}, sys, kBox, x0).pointwise_pass);
}

TEST_CASE("initial-state report")
{
    const auto sys = models::single_integrator_2d();
    const auto ok = check_validity_initial({goal_disk(), 1.0, 1.0, 6.0}, sys, kBox, vec({-3, -3}));
    CHECK(ok.mode == FeasibilityMode::initial_state);
    CHECK(ok.n_samples == 1);
    CHECK(ok.pointwise_pass);
    CHECK(ok.margin == doctest::Approx(6.0));
    const auto bad = check_validity_initial({goal_disk(), 1.0, 1.01 * 4.0 / 3.0, 6.0}, sys, kBox, vec({-3, -3}));
    CHECK_FALSE(bad.pointwise_pass);
    CHECK(bad.worst_state == vec({-3, -3}));
}

TEST_CASE("validity terms")
{
    const auto sys = models::single_integrator_2d();
    const auto t = validity_terms({goal_disk(), 1.0, 1.0, 6.0}, sys, kBox, vec({-3, -3}));
    CHECK(t.drift_term == doctest::Approx(-18.0));
    CHECK(t.actuation_term == doctest::Approx(-24.0));
    CHECK(t.margin() == doctest::Approx(6.0));
}

TEST_CASE("decoupled pass implies pointwise pass")
{
    const auto sys = models::single_integrator_2d();
    std::mt19937_64 rng(314);
    std::uniform_real_distribution<double> rd(0.05, 1.0);
    std::uniform_real_distribution<double> kd(0.01, 3.0);
    std::uniform_real_distribution<double> pos(-4.0, 4.0);
    int decoupled = 0;
    for (int i = 0; i < 50; ++i) {
        StateVector x0;
        do {
            x0 = vec({pos(rng), pos(rng)});
        } while (x0.squaredNorm() <= 1.2);
        const FccbfSpec spec{goal_disk(), rd(rng), kd(rng), 6.0};
        const auto reach = reachable_set(goal_disk(), x0);
        const double ext = std::sqrt(1.0 - reach.h_lower);
        const auto samples = reach.sample({vec({-ext, -ext}), vec({ext, ext})}, 500, 500 + i);
        const auto rep = check_validity_on(spec, sys, kBox, samples);
        if (rep.decoupled_pass) {
            ++decoupled;
            CHECK(rep.pointwise_pass);
        }
        CHECK(rep.decoupled_margin <= rep.margin + 1e-12);
    }
    CHECK(decoupled > 0);
}

TEST_CASE("parallel check equals the serial reference")
{
    const auto sys = models::single_integrator_2d();
    const auto reach = reachable_set(goal_disk(), vec({-3.5, 1.0}));
    const double ext = std::sqrt(1.0 - reach.h_lower);
    const auto samples = reach.sample({vec({-ext, -ext}), vec({ext, ext})}, 20000, 17);
    for (double k : {0.3, 0.8, 1.5}) {
        const FccbfSpec spec{goal_disk(), 0.25, k, 6.0};
        const auto a = check_validity_on(spec, sys, kBox, samples);
        const auto b = serial::check_validity_on(spec, sys, kBox, samples);
        CHECK(a.pointwise_pass == b.pointwise_pass);
        CHECK(a.decoupled_pass == b.decoupled_pass);
        CHECK(a.margin == b.margin);
        CHECK(a.decoupled_margin == b.decoupled_margin);
        CHECK(a.worst_state == b.worst_state);
    }
}

TEST_CASE("sampled k upper bound")
{
    const auto sys = models::single_integrator_2d();
    const std::vector<StateVector> pts{vec({-3, -3}), vec({-std::sqrt(18.0), 0.0})};
    const double k = k_upper_bound_sampled({goal_disk(), 1.0, 1.0, 6.0}, sys, kBox, pts);
    CHECK(k == doctest::Approx(4.0 * std::sqrt(18.0) / 18.0));
    const std::vector<StateVector> inside{vec({0.1, 0.0})};
    CHECK(std::isinf(k_upper_bound_sampled({goal_disk(), 0.5, 1.0, 6.0}, sys, kBox, inside)));
}
