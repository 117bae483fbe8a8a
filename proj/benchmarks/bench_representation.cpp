#include <benchmark/benchmark.h>

#include "sflab/lagrangian_ns.hpp"

using namespace sflab;

// one representation sweep at the acceptance shape but a light path budget
static void BM_RepresentationStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    TorusGrid grid(2, n);
    ns::NSRunConfig nc;
    nc.dim = 2;
    nc.grid_n = n;
    nc.T = 0.5;
    nc.dt = 1e-3;
    nc.paths_per_node = 64;
    nc.time_grid_intervals = 5;
    PeriodicField phi = ns::taylor_green_phi(grid);

    ns::VelocityState st;
    st.T = nc.T;
    st.grid = grid;
    st.phi = phi.leray_projected();
    for (int j = 0; j <= 5; ++j) {
        st.times.push_back(-nc.T + nc.T * j / 5.0);
        st.frames.push_back(st.phi);
    }
    for (auto _ : state) {
        auto res = ns::representation_step(st, -0.1, phi, nc);
        benchmark::DoNotOptimize(res.field.value(0, 0));
    }
    state.SetItemsProcessed(state.iterations() * grid.size() * nc.paths_per_node * 100);
}
BENCHMARK(BM_RepresentationStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_ReferenceSolver(benchmark::State& state) {
    TorusGrid grid(2, 32);
    PeriodicField phi = ns::taylor_green_phi(grid);
    for (auto _ : state) {
        auto st = ns::reference_spectral_ns(phi, 0.1, grid, 1e-3, 2);
        benchmark::DoNotOptimize(st.frames.front().value(0, 0));
    }
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_ReferenceSolver)->Unit(benchmark::kMillisecond);
