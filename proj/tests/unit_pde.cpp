#include <doctest.h>

#include <cmath>
#include <complex>

#include "sflab/drift.hpp"
#include "sflab/errors.hpp"
#include "sflab/kolmogorov.hpp"
#include "sflab/mixed_norm.hpp"

using namespace sflab;
using namespace sflab::pde;
using norms::DriftField;
using norms::MixedNormSpec;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("periodic field: spectral round trip and realness invariant") {
    TorusGrid g(3, 16);
    PeriodicField f = PeriodicField::sample_scalar(g, [](const Vec& x) {
        return std::sin(x[0]) + 0.5 * std::cos(2 * x[1] - x[2]) + 0.1;
    });
    std::vector<std::vector<std::complex<double>>> spec = {f.spectrum(0)};
    PeriodicField back = PeriodicField::from_spectrum(g, 1, spec);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::abs(back.value(i, 0) - f.value(i, 0)));
    CHECK(worst < 1e-10 * f.max_abs());
}

TEST_CASE("bessel multiplier: inverse pair and single-mode factor") {
    TorusGrid g(3, 16);
    PeriodicField f = PeriodicField::sample_scalar(
        g, [](const Vec& x) { return std::cos(x[0]) + 0.3 * std::sin(2 * x[1]); });
    PeriodicField fw = f.bessel(1.3).bessel(-1.3);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::abs(fw.value(i, 0) - f.value(i, 0)));
    CHECK(worst <= 1e-10 * f.max_abs());

    // cos(x0) under (1 - Laplace)^{1}: factor (1 + 1) = 2
    PeriodicField mode =
        PeriodicField::sample_scalar(g, [](const Vec& x) { return std::cos(x[0]); });
    PeriodicField lifted = mode.bessel(2.0);
    CHECK(lifted.value(0, 0) == doctest::Approx(2.0 * mode.value(0, 0)).epsilon(1e-12));
    CHECK(lifted.lp_norm(2.0) == doctest::Approx(2.0 * mode.lp_norm(2.0)).epsilon(1e-12));
}

TEST_CASE("spectral derivative and trig evaluation") {
    TorusGrid g(2, 32);
    PeriodicField f = PeriodicField::sample_scalar(
        g, [](const Vec& x) { return std::sin(3 * x[0]) * std::cos(x[1]); });
    PeriodicField dx = f.derivative(0);
    for (std::size_t i : {std::size_t(0), std::size_t(100), std::size_t(777)}) {
        const Vec x = g.node(i);
        CHECK(dx.value(i, 0) ==
              doctest::Approx(3 * std::cos(3 * x[0]) * std::cos(x[1])).epsilon(1e-10));
    }
    // trig evaluation agrees with the closed form off the grid
    const Vec q = {0.7321, 2.191, 0.0};
    CHECK(f.eval(q, 0) == doctest::Approx(std::sin(3 * q[0]) * std::cos(q[1])).epsilon(1e-11));
    // and reproduces nodal values at nodes
    CHECK(f.eval(g.node(55), 0) == doctest::Approx(f.value(55, 0)).epsilon(1e-12));
}

TEST_CASE("upsampled refinement keeps original nodes") {
    TorusGrid g(2, 16);
    PeriodicField f = PeriodicField::sample_scalar(
        g, [](const Vec& x) { return std::cos(2 * x[0]) * std::sin(x[1]) + 0.25; });
    PeriodicField up = f.upsampled(4);
    const TorusGrid& big = up.grid();
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            CHECK(up.value(big.index(4 * i, 4 * j), 0) ==
                  doctest::Approx(f.value(g.index(i, j), 0)).epsilon(1e-12));
}

TEST_CASE("fractional sobolev norm: s = 0 falls through to mixed_norm bitwise") {
    TorusGrid g(3, 8);
    SpaceTimeField f;
    for (int i = 0; i <= 4; ++i) {
        f.times.push_back(0.25 * i);
        f.frames.push_back(PeriodicField::sample_scalar(
            g, [i](const Vec& x) { return std::cos(x[0]) * (1.0 + 0.1 * i); }));
    }
    MixedNormSpec spec(3, 2.0, 2.0);
    const double a = fractional_sobolev_norm(f, 0.0, spec, 0.0, 1.0).value;
    const double b = norms::mixed_norm(f, spec, 0.0, 1.0);
    CHECK(a == b);  // bitwise

    // single mode with s = 2 doubles the norm
    const double c = fractional_sobolev_norm(f, 2.0, spec, 0.0, 1.0).value;
    CHECK(c == doctest::Approx(2.0 * b).epsilon(1e-12));
}

TEST_CASE("fractional sobolev norm: accuracy warning on ragged content") {
    TorusGrid g(2, 16);
    SpaceTimeField f;
    f.times = {0.0};
    PeriodicField spike(g, 1);
    spike.value_mut(g.index(3, 5), 0) = 1.0;  // flat spectrum, heavy tail
    f.frames = {spike};
    auto res = fractional_sobolev_norm(f, 1.0, MixedNormSpec(2, 2.0, 2.0), -0.5, 0.5);
    CHECK(res.accuracy_warning);
}

TEST_CASE("solve_backward: constant forcing is exact") {
    PdeGrid pg;
    pg.grid = TorusGrid(3, 8);
    pg.dt = 1e-3;
    auto sol = solve_backward(norms::zero_drift(3), constant_forcing(1.0), 0.0, 0.5, pg);
    for (std::size_t j = 0; j < sol.u.times.size(); ++j) {
        const double expect = 0.5 - sol.u.times[j];
        for (std::size_t i = 0; i < pg.grid.size(); ++i)
            CHECK(sol.u.frames[j].value(i, 0) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("solve_backward: single-mode closed form") {
    PdeGrid pg;
    pg.grid = TorusGrid(3, 16);
    pg.dt = 1e-3;
    const double S1 = 0.5;
    auto sol = solve_backward(norms::zero_drift(3), cosine_forcing(0), 0.0, S1, pg);
    double worst = 0.0;
    for (std::size_t j = 0; j < sol.u.times.size(); ++j) {
        const double amp = 2.0 * (1.0 - std::exp(-(S1 - sol.u.times[j]) / 2.0));
        for (std::size_t i = 0; i < pg.grid.size(); ++i)
            worst = std::max(worst, std::abs(sol.u.frames[j].value(i, 0) -
                                             amp * std::cos(pg.grid.node(i)[0])));
    }
    CHECK(worst < 1e-10);

    // mode amplitude grows monotonically away from the terminal slice
    // (the spectral diffusion factor is a contraction)
    double prev = -1.0;
    for (std::size_t j = sol.u.times.size(); j-- > 0;) {
        const double amp = std::abs(sol.u.frames[j].value(0, 0));
        CHECK(amp >= prev - 1e-14);
        prev = amp;
    }
}

TEST_CASE("solve_backward: transport phase against the complex-rate oracle") {
    PdeGrid pg;
    pg.grid = TorusGrid(3, 16);
    pg.dt = 1e-3;
    const double S1 = 0.5;
    const Vec v = {1.0, 0.5, -0.25};
    auto sol = solve_backward(norms::constant_drift(3, v), cosine_forcing(0), 0.0, S1, pg);
    const std::complex<double> zeta(-0.5, v[0]);
    double worst = 0.0;
    for (std::size_t j = 0; j < sol.u.times.size(); ++j) {
        const double tau = S1 - sol.u.times[j];
        const std::complex<double> amp = (std::exp(zeta * tau) - 1.0) / zeta;
        for (std::size_t i = 0; i < pg.grid.size(); i += 7) {
            const double x0 = pg.grid.node(i)[0];
            const double expect = (amp * std::polar(1.0, x0)).real();
            worst = std::max(worst, std::abs(sol.u.frames[j].value(i, 0) - expect));
        }
    }
    CHECK(worst < 5e-3);
}

TEST_CASE("solve_backward: CFL refusal carries the required step") {
    PdeGrid pg;
    pg.grid = TorusGrid(3, 8);
    pg.dt = 0.25;  // |b| dt = 2.5 against a spacing of ~0.785
    bool caught = false;
    try {
        solve_backward(norms::constant_drift(3, {10.0, 0.0, 0.0}), constant_forcing(1.0), 0.0,
                       0.5, pg);
    } catch (const CflError& e) {
        caught = true;
        CHECK(e.required_dt > 0.0);
        CHECK(e.required_dt < 0.25);
    }
    CHECK(caught);
}

TEST_CASE("apriori probe: zero forcing and closed-form ratio") {
    PdeGrid pg;
    pg.grid = TorusGrid(3, 16);
    pg.dt = 1e-3;
    AprioriConfig ac;
    ac.pde = pg;
    ac.S1 = 0.5;
    ac.spec = MixedNormSpec(3, 2.0, 2.0);
    ac.alpha = 0.0;

    auto zero = apriori_probe({norms::zero_drift(3)}, {constant_forcing(0.0)}, ac);
    REQUIRE(zero.rows.size() > 0);
    CHECK(zero.rows[0].value == 0.0);  // zero forcing reported as ratio 0
    CHECK(zero.passed());

    auto mode = apriori_probe({norms::zero_drift(3)}, {cosine_forcing(0)}, ac);
    CHECK(mode.constants["max_ratio"] == doctest::Approx(1.4138964808676462).epsilon(0.01));
}

TEST_CASE("apriori probe: negative-order data in divergence form") {
    PdeGrid pg;
    pg.grid = TorusGrid(3, 16);
    pg.dt = 1e-3;
    Forcing div;
    div.potential = [](double, const Vec& x) { return std::cos(x[0]); };
    div.axis = 0;
    AprioriConfig ac;
    ac.pde = pg;
    ac.S1 = 0.5;
    ac.spec = MixedNormSpec(3, 2.0, 2.0);
    ac.alpha = -1.0;
    auto rep = apriori_probe({norms::zero_drift(3)}, {div}, ac);
    CHECK(rep.passed());
    CHECK(rep.constants["max_ratio"] > 0.0);
    CHECK(std::isfinite(rep.constants["max_ratio"]));
    CHECK_THROWS_AS([&] {
        AprioriConfig bad = ac;
        bad.alpha = -2.0;
        apriori_probe({norms::zero_drift(3)}, {div}, bad);
    }(), DomainError);
}

TEST_CASE("lifted H^{-1} norm of a divergence-form forcing") {
    // f = d_0 cos(x0) = -sin(x0); (1-Laplace)^{-1/2} scales the mode by 2^{-1/2}
    TorusGrid g(3, 16);
    SpaceTimeField f;
    f.times = {0.0, 1.0};
    for (int i = 0; i < 2; ++i)
        f.frames.push_back(
            PeriodicField::sample_scalar(g, [](const Vec& x) { return -std::sin(x[0]); }));
    const double got = fractional_sobolev_norm(f, -1.0, MixedNormSpec(3, 2.0, 2.0), 0.0, 1.0).value;
    const double sin_l2 = f.frames[0].lp_norm(2.0);
    CHECK(got == doctest::Approx(sin_l2 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("feynman-kac: constant forcing is exact on both sides") {
    FeynmanKacConfig fk;
    fk.pde.grid = TorusGrid(3, 8);
    fk.pde.dt = 1e-3;
    fk.S1 = 0.25;
    fk.xs = {{kPi, kPi, kPi}};
    fk.n_paths = 32;
    auto rep = feynman_kac_check(norms::zero_drift(3), constant_forcing(1.0), fk);
    CHECK(rep.passed());
    CHECK(rep.constants["max_abs_diff"] < 1e-10);
}

TEST_CASE("feynman-kac: single mode against heat-kernel arithmetic") {
    FeynmanKacConfig fk;
    fk.pde.grid = TorusGrid(3, 16);
    fk.pde.dt = 1e-3;
    fk.S1 = 0.25;
    fk.xs = {{kPi, kPi, kPi}, {kPi + 0.7, kPi, kPi - 0.4}};
    fk.n_paths = 20000;
    fk.seed = 4;
    auto rep = feynman_kac_check(norms::zero_drift(3), cosine_forcing(0), fk);
    CHECK(rep.passed());

    // independent oracle: E int cos(x0 + W) dt = cos(x0) (2)(1 - e^{-T/2})
    double mc0 = 0.0;
    for (const auto& row : rep.rows)
        if (row.name == "mc" && row.axis.at("x") == 0.0) mc0 = row.value;
    const double oracle = std::cos(kPi) * 2.0 * (1.0 - std::exp(-0.125));
    CHECK(mc0 == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("iterated duality: constant test function gives zero on both sides") {
    DualityConfig dc;
    dc.pde.grid = TorusGrid(3, 8);
    dc.pde.dt = 1e-3;
    dc.S1 = 0.25;
    dc.xs = {{kPi, kPi, kPi}};
    dc.n_paths = 64;
    TestFunction c;
    c.value = [](double, const Vec&) { return 3.0; };
    c.gradient = [](double, const Vec&) { return vec_zero(); };
    auto rep = iterated_integral_duality(2, {c, cosine_test(0)}, {0, 0},
                                         norms::zero_drift(3), dc);
    for (const auto& row : rep.rows)
        if (row.name == "pde" || row.name == "mc") CHECK(std::abs(row.value) < 1e-12);
}

TEST_CASE("iterated duality: n = 1 heat-smoothed derivative oracle") {
    DualityConfig dc;
    dc.pde.grid = TorusGrid(3, 16);
    dc.pde.dt = 1e-3;
    dc.S1 = 0.25;
    dc.xs = {{kPi + 0.3, kPi, kPi}};
    dc.n_paths = 30000;
    dc.seed = 8;
    auto rep = iterated_integral_duality(1, {sine_test(0)}, {0}, norms::zero_drift(3), dc);
    CHECK(rep.passed());
    // oracle: E int d_0 sin(x0 + W_t) dt = cos(x0) 2 (1 - e^{-T/2})
    double pde_val = 0.0;
    for (const auto& row : rep.rows)
        if (row.name == "pde") pde_val = row.value;
    const double oracle = std::cos(kPi + 0.3) * 2.0 * (1.0 - std::exp(-0.125));
    CHECK(pde_val == doctest::Approx(oracle).epsilon(1e-3));

    CHECK_THROWS_AS(iterated_integral_duality(4, {sine_test(0), sine_test(0), sine_test(0),
                                                  sine_test(0)},
                                              {0, 0, 0, 0}, norms::zero_drift(3), dc),
                    DomainError);
}

TEST_CASE("embedding probe: polynomial-in-time single mode closed forms") {
    // u(t,x) = t cos(x0) on [0,1], d = 3, p = q = 2, alpha = 0
    TorusGrid g(3, 16);
    PDESolveReport sol;
    sol.grid = g;
    sol.S0 = 0.0;
    sol.S1 = 1.0;
    sol.dt = 1e-2;
    const int nt = 100;
    for (int i = 0; i <= nt; ++i) {
        const double t = static_cast<double>(i) / nt;
        sol.u.times.push_back(t);
        sol.u.frames.push_back(
            PeriodicField::sample_scalar(g, [t](const Vec& x) { return t * std::cos(x[0]); }));
        sol.ut.times.push_back(t);
        sol.ut.frames.push_back(
            PeriodicField::sample_scalar(g, [](const Vec& x) { return std::cos(x[0]); }));
    }
    MixedNormSpec spec(3, 2.0, 2.0);
    std::vector<EmbeddingCase> cases(3);
    cases[0].kind = EmbeddingCase::Kind::sobolev1;
    cases[0].r = 4.0;
    cases[0].s = 8.0 / 3.0;
    cases[1].kind = EmbeddingCase::Kind::sobolev2;
    cases[1].r = 12.0;
    cases[1].s = 8.0;
    cases[2].kind = EmbeddingCase::Kind::morrey;
    cases[2].theta = 0.25;
    auto rep = parabolic_embedding_probe(sol, spec, cases);
    CHECK(rep.passed());

    const double V = g.volume();
    const double c2 = std::sqrt(V / 2.0);                    // ||cos||_{L^2}
    const double c4 = std::pow(V * 3.0 / 8.0, 0.25);         // ||cos||_{L^4}
    const double c12 = std::pow(V * 924.0 / 4096.0, 1.0 / 12.0);
    const double rhs = c2 + 2.0 * c2 / std::sqrt(3.0);       // ||u_t|| + ||u||_{H^{2,2}_2}

    const double lhs1 = std::pow(2.0, 0.5) * c4 * std::pow(3.0 / 11.0, 3.0 / 8.0);
    const double lhs2 = c12 * std::pow(1.0 / (8.0 / 3.0 + 1.0), 3.0 / 8.0);
    const double lhs3 = std::pow(2.0, 0.25) * c2;  // worst Morrey pair at |t1-t2| = 1

    REQUIRE(rep.rows.size() >= 9);
    auto ratio_of = [&](int case_idx) {
        for (const auto& row : rep.rows)
            if (row.name == "ratio" && row.axis.at("case") == case_idx) return row.value;
        return -1.0;
    };
    CHECK(ratio_of(0) == doctest::Approx(lhs1 / rhs).epsilon(0.02));
    CHECK(ratio_of(1) == doctest::Approx(lhs2 / rhs).epsilon(0.02));
    CHECK(ratio_of(2) == doctest::Approx(lhs3 / rhs).epsilon(0.02));

    // exponent relation violations are rejected
    std::vector<EmbeddingCase> bad(1);
    bad[0].kind = EmbeddingCase::Kind::sobolev1;
    bad[0].r = 3.0;
    bad[0].s = 3.0;
    CHECK_THROWS_AS(parabolic_embedding_probe(sol, spec, bad), DomainError);

    std::vector<EmbeddingCase> badm(1);
    badm[0].kind = EmbeddingCase::Kind::morrey;
    badm[0].theta = 0.75;  // >= 1 - 1/q
    CHECK_THROWS_AS(parabolic_embedding_probe(sol, spec, badm), DomainError);
}

TEST_CASE("embedding probe: trivial zero solution") {
    TorusGrid g(3, 8);
    PDESolveReport sol;
    sol.grid = g;
    sol.S0 = 0.0;
    sol.S1 = 1.0;
    for (int i = 0; i <= 4; ++i) {
        sol.u.times.push_back(0.25 * i);
        sol.u.frames.push_back(PeriodicField(g, 1));
        sol.ut.times.push_back(0.25 * i);
        sol.ut.frames.push_back(PeriodicField(g, 1));
    }
    std::vector<EmbeddingCase> cases(1);
    cases[0].kind = EmbeddingCase::Kind::sobolev1;
    cases[0].r = 4.0;
    cases[0].s = 8.0 / 3.0;
    auto rep = parabolic_embedding_probe(sol, MixedNormSpec(3, 2.0, 2.0), cases);
    for (const auto& row : rep.rows) CHECK(row.value == 0.0);
}

TEST_CASE("duality residual: linear-in-dt constant estimated by dt halving") {
    // with a transport drift the explicit term contributes an O(dt) bias;
    // halving dt isolates the linear coefficient and the residual model
    // |MC - PDE| <= 3 SE + C dt must hold at both steps
    FeynmanKacConfig fk;
    fk.pde.grid = TorusGrid(3, 16);
    fk.S1 = 0.5;
    fk.xs = {{kPi, kPi, kPi}};
    fk.n_paths = 40000;
    fk.seed = 21;
    const DriftField b = norms::constant_drift(3, {1.0, 0.5, -0.25});

    auto run_at = [&](double dt) {
        FeynmanKacConfig c = fk;
        c.pde.dt = dt;
        c.tol_dt_coeff = 1e9;  // measure, do not gate
        auto rep = feynman_kac_check(b, cosine_forcing(0), c);
        return std::pair<double, double>(rep.constants["max_abs_diff"],
                                         rep.constants["max_se"]);
    };
    const auto [d1, se1] = run_at(4e-3);
    const auto [d2, se2] = run_at(2e-3);
    const double c_hat = std::max(0.0, (d1 - d2) / 2e-3);
    CHECK(d1 <= 3 * se1 + (c_hat + 0.5) * 4e-3 + 1e-12);
    CHECK(d2 <= 3 * se2 + (c_hat + 0.5) * 2e-3 + 1e-12);
}
