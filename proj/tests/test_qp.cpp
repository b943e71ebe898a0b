#include "fccbf/errors.hpp"
#include "fccbf/qp.hpp"

#include "doctest.h"
#include "qp_oracle.hpp"

#include <optional>
#include <random>

using namespace fccbf;
using fccbf::testing::enumeration_oracle;
using fccbf::testing::random_problem;
using fccbf::testing::row;

namespace {

QpProblem box_problem(double bound)
{
    QpProblem p;
    p.hessian = Eigen::Matrix2d::Identity();
    p.bounds = ControlBounds::symmetric(Eigen::Vector2d(bound, bound));
    return p;
}

}  // namespace

TEST_CASE("unconstrained minimum inside the box")
{
    const auto s = solve(box_problem(2.0));
    CHECK(s.status == QpStatus::optimal);
    CHECK(s.u.norm() == 0.0);
    CHECK(s.objective == 0.0);
    CHECK(s.active_set.empty());
    CHECK(kkt_check(box_problem(2.0), s));
}

TEST_CASE("projection onto a half-space")
{
    auto p = box_problem(2.0);
    p.rows.push_back(row(1, 1, -3));
    const auto s = solve(p);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.u[0] == doctest::Approx(1.5));
    CHECK(s.u[1] == doctest::Approx(1.5));
    CHECK(s.objective == doctest::Approx(4.5));
    CHECK(s.active_set == std::vector<int>{0});
    CHECK(kkt_check(p, s));

    QpSolution off = s;
    off.u += Eigen::Vector2d(1e-3, 1e-3);
    CHECK_FALSE(kkt_check(p, off));
}

TEST_CASE("infeasible hard row")
{
    auto p = box_problem(1.0);
    p.rows.push_back(row(1, 1, -3));
    const auto s = solve(p);
    CHECK(s.status == QpStatus::infeasible_hard);
    CHECK(p.bounds.contains(s.u));
}

TEST_CASE("relaxed row")
{
    auto p = box_problem(1.0);
    p.rows.push_back(row(1, 1, -3, "goal"));
    p.relax_tags.insert("goal");
    const auto s = solve(p);
    REQUIRE(s.status == QpStatus::relaxed);
    CHECK(s.u[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(s.u[1] == doctest::Approx(1.0).epsilon(1e-5));
    REQUIRE(s.slacks.size() == 1);
    CHECK(s.slacks[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(p.bounds.max_violation(s.u) <= 1e-12);
    CHECK(kkt_check(p, s));
}

TEST_CASE("relaxation of a feasible problem changes nothing")
{
    auto p = box_problem(2.0);
    p.rows.push_back(row(1, 1, -3, "goal"));
    p.relax_tags.insert("goal");
    const auto s = solve(p);
    CHECK(s.status == QpStatus::optimal);
    CHECK(s.slack_total() == 0.0);
    CHECK(s.u[0] == doctest::Approx(1.5));

    // Called directly, the penalty form trades a slack of order 1/M.
    ActiveSetQp qp;
    const auto r = qp.solve_relaxed(p);
    CHECK(r.u[0] == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(r.slack_total() <= 1e-5);
}

TEST_CASE("contradictory hard rows")
{
    auto p = box_problem(5.0);
    p.rows.push_back(row(1, 0, -1, "a"));
    p.rows.push_back(row(-1, 0, -1, "b"));
    ActiveSetQp qp;
    const auto first = qp.solve(box_problem(5.0));
    CHECK(first.status == QpStatus::optimal);
    const auto s = qp.solve(p);
    CHECK(s.status == QpStatus::infeasible_hard);
    CHECK(s.u.norm() == 0.0);  // previous control, clamped
    CHECK(qp.stats().infeasible_hard == 1);

    // one relaxable, one hard: the soft one gives way
    p.relax_tags.insert("b");
    const auto r = solve(p);
    CHECK(r.status == QpStatus::relaxed);
    CHECK(r.u[0] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("malformed problems are configuration errors")
{
    auto p = box_problem(1.0);
    p.hessian(0, 0) = -1.0;
    CHECK_THROWS_AS(solve(p), ConfigError);
    auto q = box_problem(1.0);
    q.hessian(0, 1) = 0.5;
    CHECK_THROWS_AS(solve(q), ConfigError);
    auto r = box_problem(1.0);
    r.rows.push_back(row(1, 1, 0));
    r.rows.back().coeff = RowVector::Ones(3);
    CHECK_THROWS_AS(solve(r), ConfigError);
}

TEST_CASE("matches the enumeration oracle on 100 random problems")
{
    std::mt19937_64 rng(2024);
    int feasible = 0;
    for (int i = 0; i < 100; ++i) {
        const QpProblem p = random_problem(rng, false);
        const auto s = solve(p);
        const auto oracle = enumeration_oracle(p);
        if (oracle) {
            ++feasible;
            REQUIRE(s.status == QpStatus::optimal);
            CHECK((s.u - *oracle).norm() <= 1e-6);
            CHECK(kkt_check(p, s));
        } else {
            CHECK(s.status == QpStatus::infeasible_hard);
        }
    }
    CHECK(feasible >= 50);
}

TEST_CASE("matches the enumeration oracle with a general hessian")
{
    std::mt19937_64 rng(77);
    for (int i = 0; i < 100; ++i) {
        const QpProblem p = random_problem(rng, true);
        const auto s = solve(p);
        const auto oracle = enumeration_oracle(p);
        if (oracle) {
            REQUIRE(s.status == QpStatus::optimal);
            CHECK((s.u - *oracle).norm() <= 1e-6);
            CHECK(kkt_check(p, s));
        }
    }
}

TEST_CASE("warm start does not change the answer")
{
    std::mt19937_64 rng(5);
    ActiveSetQp warm;
    for (int i = 0; i < 100; ++i) {
        const QpProblem p = random_problem(rng, false);
        const auto a = warm.solve(p);
        const auto b = solve(p);
        CHECK(a.status == b.status);
        if (a.status == QpStatus::optimal) {
            CHECK((a.u - b.u).norm() <= 1e-9);
        }
    }
}

TEST_CASE("identical problems give bit-identical solutions")
{
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20; ++i) {
        const QpProblem p = random_problem(rng, false);
        const auto a = solve(p);
        const auto b = solve(p);
        CHECK(a.status == b.status);
        CHECK(a.u == b.u);
        CHECK(a.objective == b.objective);
        CHECK(a.active_set == b.active_set);
    }
}

TEST_CASE("scaling the hessian keeps the minimizer")
{
    std::mt19937_64 rng(13);
    for (int i = 0; i < 50; ++i) {
        QpProblem p = random_problem(rng, true);
        const auto a = solve(p);
        p.hessian *= 37.5;
        const auto b = solve(p);
        CHECK(a.status == b.status);
        if (a.status == QpStatus::optimal) {
            CHECK((a.u - b.u).norm() <= 1e-9);
        }
    }
}

TEST_CASE("status strings round-trip")
{
    for (auto s : {QpStatus::optimal, QpStatus::relaxed, QpStatus::infeasible_hard}) {
        CHECK(qp_status_from_string(to_string(s)) == s);
    }
    CHECK(std::string(to_string(QpStatus::infeasible_hard)) == "infeasible-hard");
    CHECK_THROWS_AS(qp_status_from_string("nope"), ConfigError);
}
