#include <benchmark/benchmark.h>

#include <cmath>

#include "cbesq/controlled_ode.hpp"
#include "cbesq/rare_event.hpp"
#include "cbesq/rate.hpp"
#include "cbesq/sde.hpp"

using namespace cbesq;

static void BM_SimulateZ(benchmark::State& state) {
    SimParams sp;
    sp.grid = TimeGrid::graded(1.0, static_cast<std::size_t>(state.range(0)), 2.0);
    sp.epsilon = 0.1;
    sp.seed = 1;
    std::uint64_t stream = 0;
    for (auto _ : state) {
        const auto p = sp.with_stream(stream++);
        benchmark::DoNotOptimize(simulate_z(p, sample_noise(p)));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateZ)->Arg(1024)->Arg(4096)->Arg(16384);

static void BM_SolvePhi(benchmark::State& state) {
    const auto grid = TimeGrid::graded(1.0, static_cast<std::size_t>(state.range(0)), 2.0);
    const auto h = Control::from_rate(grid, [](double t) { return std::sin(t); });
    for (auto _ : state) benchmark::DoNotOptimize(solve_phi(h, OdeScheme{grid, 1, 1e-6}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SolvePhi)->Arg(1024)->Arg(4096)->Arg(16384);

static void BM_EvalI(benchmark::State& state) {
    const auto grid = TimeGrid::graded(1.0, 4096, 2.0);
    const auto phi = solve_phi(Control::from_rate(grid, [](double) { return 1.0; }), OdeScheme{grid, 1, 1e-6}).path;
    for (auto _ : state) benchmark::DoNotOptimize(eval_I(phi));
}
BENCHMARK(BM_EvalI);

static void BM_SupJ(benchmark::State& state) {
    const auto grid = TimeGrid::graded(1.0, 4096, 2.0);
    const auto phi = solve_phi(Control::from_rate(grid, [](double) { return 1.0; }), OdeScheme{grid, 1, 1e-6}).path;
    for (auto _ : state) benchmark::DoNotOptimize(sup_J(phi, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_SupJ)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_TiltedBallProb(benchmark::State& state) {
    const auto grid = TimeGrid::graded(1.0, 1024, 2.0);
    const auto h = Control::from_rate(grid, [](double) { return 1.0; });
    const auto target = solve_phi(h, OdeScheme{grid, 1, 1e-6}).path;
    for (auto _ : state) benchmark::DoNotOptimize(estimate_ball_prob(target, 0.3, 0.1, 1000, TiltSpec{h, 0.1}, 3));
}
BENCHMARK(BM_TiltedBallProb)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
