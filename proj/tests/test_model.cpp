#include "fccbf/errors.hpp"
#include "fccbf/model.hpp"
#include "fccbf/sim.hpp"

#include "doctest.h"

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

RowVector central_difference(const ScalarField& f, const StateVector& x, double step = 1e-6)
{
    RowVector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        StateVector hi = x;
        StateVector lo = x;
        hi[i] += step;
        lo[i] -= step;
        g[i] = (f(hi) - f(lo)) / (2.0 * step);
    }
    return g;
}

}  // namespace

TEST_CASE("lie_f vanishes under zero drift")
{
    const auto sys = models::single_integrator_2d();
    CHECK(lie_f(goal_disk(), sys, vec({-3, -3})) == 0.0);
    CHECK(lie_f(constraints::disk_exterior("b", {2.0, 2.5}, 1.0), sys, vec({0.3, -7})) == 0.0);
}

TEST_CASE("lie_f of position on the double integrator is the velocity")
{
    const auto sys = models::double_integrator_1d();
    CHECK(lie_f(constraints::position_lower_limit("b", 0.0), sys, vec({1, 2})) == doctest::Approx(2.0));
}

TEST_CASE("lie_g examples")
{
    const auto si = models::single_integrator_2d();
    const RowVector g = lie_g(goal_disk(), si, vec({-3, -3}));
    CHECK(g[0] == doctest::Approx(6.0));
    CHECK(g[1] == doctest::Approx(6.0));
    CHECK(lie_g(goal_disk(), si, vec({0, 0})).norm() == 0.0);

    const auto di = models::double_integrator_1d();
    CHECK(lie_g(constraints::position_lower_limit("b", 0.0), di, vec({1, 2}))[0] == 0.0);
    CHECK(lie_g_of_order(constraints::position_lower_limit("b", 0.0), 1, di, vec({1, 2}))[0] ==
          doctest::Approx(1.0));
}

TEST_CASE("dimension mismatch is rejected")
{
    const auto sys = models::single_integrator_2d();
    CHECK_THROWS_AS(sys.drift(vec({1, 2, 3})), ConfigError);
    CHECK_THROWS_AS(sys.derivative(vec({1, 2}), vec({1})), ConfigError);
}

TEST_CASE("relative degree checks")
{
    std::vector<StateVector> samples;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-4, 4);
    for (int i = 0; i < 50; ++i) {
        samples.push_back(vec({d(rng), d(rng)}));
    }
    CHECK(check_relative_degree(goal_disk(), models::single_integrator_2d(), samples));

    const auto di = models::double_integrator_1d();
    CHECK(check_relative_degree(constraints::position_lower_limit("b", 0.0), di, samples));
    CHECK_FALSE(check_relative_degree(constraints::coordinate("b", 0, 2), di, samples));

    auto broken = constraints::position_lower_limit("b", 0.0);
    broken.higher_lie_derivatives.clear();
    CHECK_THROWS_AS(check_relative_degree(broken, di, samples), ConfigError);
}

TEST_CASE("gradient zeros are flagged, not failed")
{
    const std::vector<StateVector> samples{vec({1, 0}), vec({0, 0}), vec({-2, 3})};
    const auto rep = relative_degree_report(goal_disk(), models::single_integrator_2d(), samples);
    CHECK(rep.consistent);
    REQUIRE(rep.degenerate_samples.size() == 1);
    CHECK(rep.degenerate_samples[0] == 1);
}

TEST_CASE("analytic gradients match central differences at 100 states")
{
    std::vector<ConstraintFunction> fns{goal_disk(),
                                        constraints::disk_exterior("b1", {2.0, 2.5}, 1.0),
                                        constraints::disk_exterior("b4", {-2.0, -2.5}, 1.0),
                                        constraints::disk_interior("g", {0.5, -1.0}, 2.0)};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-5, 5);
    for (int i = 0; i < 100; ++i) {
        const StateVector x = vec({d(rng), d(rng)});
        for (const auto& c : fns) {
            const RowVector fd = central_difference(c.value, x);
            const RowVector an = c.gradient(x);
            CHECK((fd - an).norm() <= 1e-5 * std::max(1.0, an.norm()));
        }
    }

    const auto lim = constraints::position_lower_limit("b", 0.5);
    for (int i = 0; i < 100; ++i) {
        const StateVector x = vec({d(rng), d(rng)});
        CHECK((central_difference(lim.value, x) - lim.gradient(x)).norm() <= 1e-5);
        const auto& l1 = lim.higher_lie_derivatives.at(0);
        CHECK((central_difference(l1.value, x) - l1.gradient(x)).norm() <= 1e-5);
    }
}

TEST_CASE("value rate along a trajectory matches the Lie derivatives")
{
    const auto sys = models::single_integrator_2d();
    const auto b = constraints::disk_exterior("b", {2.0, 2.5}, 1.0);
    StateVector x = vec({-1.0, 0.5});
    const double dt = 1e-4;
    const ControlVector u = vec({0.7, -1.3});
    for (int i = 0; i < 20; ++i) {
        const StateVector next = integrate(sys, x, u, dt);
        const double rate = (b(next) - b(x)) / dt;
        const StateVector mid = 0.5 * (x + next);
        const double predicted = lie_f(b, sys, mid) + lie_g(b, sys, mid).dot(u);
        CHECK(rate == doctest::Approx(predicted).epsilon(1e-8));
        x = next;
    }
}

TEST_CASE("control bounds helpers")
{
    const auto b = ControlBounds::symmetric(vec({2, 2}));
    CHECK(b.support(RowVector(vec({6, -6}).transpose())) == doctest::Approx(24.0));
    CHECK(b.support(RowVector(vec({0, 1}).transpose())) == doctest::Approx(2.0));
    CHECK(b.max_violation(vec({2.5, -1})) == doctest::Approx(0.5));
    CHECK(b.contains(vec({2, -2})));
    CHECK(b.clamp(vec({3, -9})).isApprox(vec({2, -2})));
    const auto u = ControlBounds::unbounded(2);
    CHECK(std::isinf(u.support(RowVector(vec({1, 0}).transpose()))));
    CHECK(u.support(RowVector(vec({0, 0}).transpose())) == 0.0);
}
