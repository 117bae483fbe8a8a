#include <benchmark/benchmark.h>

#include <cmath>

#include "sflab/drift.hpp"
#include "sflab/kolmogorov.hpp"
#include "sflab/periodic_field.hpp"

using namespace sflab;

static PeriodicField test_field(int dim, int n) {
    TorusGrid g(dim, n);
    return PeriodicField::sample_scalar(g, [](const Vec& x) {
        return std::sin(x[0]) + 0.5 * std::cos(2 * x[1] + x[2]);
    });
}

static void BM_Bessel(benchmark::State& state) {
    PeriodicField f = test_field(3, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        PeriodicField g = f.bessel(1.0);
        benchmark::DoNotOptimize(g.value(0, 0));
    }
}
BENCHMARK(BM_Bessel)->Arg(16)->Arg(32);

static void BM_LerayProjection(benchmark::State& state) {
    TorusGrid g(3, static_cast<int>(state.range(0)));
    PeriodicField f = PeriodicField::sample_vector(g, [](const Vec& x) {
        return Vec{std::sin(x[1]), std::cos(x[2]), std::sin(x[0] + x[1])};
    });
    for (auto _ : state) {
        PeriodicField p = f.leray_projected();
        benchmark::DoNotOptimize(p.value(0, 0));
    }
}
BENCHMARK(BM_LerayProjection)->Arg(32)->Arg(64);

static void BM_BackwardSolveStep(benchmark::State& state) {
    // cost of a full backward solve per 100 steps at N = 32
    pde::PdeGrid pg;
    pg.grid = TorusGrid(3, 32);
    pg.dt = 1e-3;
    const auto b = norms::ou_well_drift(3);
    for (auto _ : state) {
        auto sol = pde::solve_backward(b, pde::cosine_forcing(0), 0.0, 0.1, pg);
        benchmark::DoNotOptimize(sol.u.frames.back().value(0, 0));
    }
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_BackwardSolveStep);

static void BM_MollifyGrid(benchmark::State& state) {
    TorusGrid g(3, 32);
    PeriodicField f = PeriodicField::sample_vector(g, [](const Vec& x) {
        return Vec{std::sin(x[0]), std::cos(x[1]), std::sin(x[2])};
    });
    for (auto _ : state) {
        PeriodicField m = norms::mollify_grid(f, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(m.value(0, 0));
    }
}
BENCHMARK(BM_MollifyGrid)->Arg(4)->Arg(16);
