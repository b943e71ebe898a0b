// Serial reference vs OpenMP for the sampled validity check and batch runs.

#include "fccbf/bench.hpp"
#include "fccbf/design.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace {

using namespace fccbf;

std::vector<StateVector> validity_samples(std::size_t n)
{
    const auto h = constraints::disk_interior("h", Eigen::Vector2d::Zero(), 1.0);
    Eigen::VectorXd x0(2);
    x0 << -3.0, -3.0;
    const auto reach = reachable_set(h, x0);
    const double ext = std::sqrt(18.0);
    Eigen::VectorXd lo(2), hi(2);
    lo << -ext, -ext;
    hi << ext, ext;
    return reach.sample({lo, hi}, n, 1);
}

template <typename Check>
void validity(benchmark::State& state, Check check)
{
    const auto sys = models::single_integrator_2d();
    const auto bounds = ControlBounds::symmetric(Eigen::Vector2d(2.0, 2.0));
    const FccbfSpec spec{constraints::disk_interior("h", Eigen::Vector2d::Zero(), 1.0), 1.0, 0.9, 6.0};
    const auto samples = validity_samples(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(check(spec, sys, bounds, samples));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ValiditySerial(benchmark::State& state)
{
    validity(state, [](const auto&... a) { return serial::check_validity_on(a...); });
}

void BM_ValidityOpenMP(benchmark::State& state)
{
    validity(state, [](const auto&... a) { return check_validity_on(a...); });
}

const Scenario& case_study()
{
    static const Scenario sc = load_scenario(FCCBF_SCENARIO_DIR "/case_study_4obs.json");
    return sc;
}

void BM_BatchSerial(benchmark::State& state)
{
    for (auto _ : state) {
        benchmark::DoNotOptimize(serial::run_batch(case_study()));
    }
}

void BM_BatchOpenMP(benchmark::State& state)
{
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_batch(case_study()));
    }
}

}  // namespace

BENCHMARK(BM_ValiditySerial)->Arg(10000)->Arg(100000);
BENCHMARK(BM_ValidityOpenMP)->Arg(10000)->Arg(100000);
BENCHMARK(BM_BatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchOpenMP)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
