#include <benchmark/benchmark.h>

#include "sflab/drift.hpp"
#include "sflab/flow.hpp"
#include "sflab/rng.hpp"

using namespace sflab;

static void BM_NormalPair(benchmark::State& state) {
    CounterRng rng(1, 0);
    double z0, z1;
    std::int64_t k = 0;
    for (auto _ : state) {
        rng.normal_pair(7, k++, 0, z0, z1);
        benchmark::DoNotOptimize(z0 + z1);
    }
}
BENCHMARK(BM_NormalPair);

static void BM_PathStepsZeroDrift(benchmark::State& state) {
    flow::FlowConfig fc;
    fc.t = 0.1;
    fc.dt = 1e-3;
    fc.n_paths = static_cast<int>(state.range(0));
    fc.points = {{0.0, 0.0, 0.0}};
    const auto b = norms::zero_drift(3);
    for (auto _ : state) {
        flow::FlowEnsemble ens(b, fc);
        benchmark::DoNotOptimize(ens.state(0, 0, 0));
    }
    state.SetItemsProcessed(state.iterations() * fc.n_paths * 100);
}
BENCHMARK(BM_PathStepsZeroDrift)->Arg(256)->Arg(1024);

static void BM_PathStepsRadialSingular(benchmark::State& state) {
    flow::FlowConfig fc;
    fc.t = 0.1;
    fc.dt = 1e-3;
    fc.n_paths = 256;
    fc.points = {{3.2, 3.0, 3.1}};
    const auto b = norms::singular_approximation_radial(3, 0.5, 16);
    for (auto _ : state) {
        flow::FlowEnsemble ens(b, fc);
        benchmark::DoNotOptimize(ens.state(0, 0, 0));
    }
    state.SetItemsProcessed(state.iterations() * fc.n_paths * 100);
}
BENCHMARK(BM_PathStepsRadialSingular);

static void BM_VariationalReplay(benchmark::State& state) {
    flow::FlowConfig fc;
    fc.t = 0.1;
    fc.dt = 1e-3;
    fc.n_paths = 256;
    fc.points = {{3.2, 3.0, 3.1}};
    const auto b = norms::taylor_green_drift(3);
    flow::FlowEnsemble ens(b, fc);
    for (auto _ : state) {
        auto rec = flow::variational_flow(ens, b);
        benchmark::DoNotOptimize(rec.at(0, 0, 0));
    }
    state.SetItemsProcessed(state.iterations() * fc.n_paths * 100);
}
BENCHMARK(BM_VariationalReplay);
