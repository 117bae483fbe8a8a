#include <doctest.h>

#include <cmath>

#include "sflab/drift.hpp"
#include "sflab/errors.hpp"
#include "sflab/estimators.hpp"

using namespace sflab;
using namespace sflab::estimators;
using norms::DriftField;
using norms::MixedNormSpec;

namespace {
constexpr double kPi = 3.14159265358979323846;

pde::TestFunction one_fn() {
    pde::TestFunction f;
    f.value = [](double, const Vec&) { return 1.0; };
    f.gradient = [](double, const Vec&) { return vec_zero(); };
    return f;
}
} // namespace

TEST_CASE("krylov: constant test function is exact, lambda family linear") {
    KrylovConfig kc;
    kc.T = 0.5;
    kc.dt = 2e-3;
    kc.x_grid = 4;
    kc.n_paths = 50;
    auto rep = krylov_check({norms::zero_drift(3)}, one_fn(), MixedNormSpec(3, 4.0, 4.0), kc);
    CHECK(rep.passed());
    // C * ||1|| = sup_x E int 1 dt = T exactly
    double c = -1.0, fnorm = rep.constants["f_norm"];
    for (const auto& row : rep.rows)
        if (row.name == "constant") c = row.value;
    CHECK(c * fnorm == doctest::Approx(0.5).epsilon(1e-12));

    // lambda rows are exact multiples (path-by-path linearity)
    double base = -1.0;
    for (const auto& row : rep.rows) {
        if (row.name != "scaled_sup") continue;
        const double lam = row.axis.at("lambda");
        if (lam == 1.0) base = row.value;
    }
    for (const auto& row : rep.rows) {
        if (row.name != "scaled_sup") continue;
        CHECK(row.value == row.axis.at("lambda") * base);
    }
    CHECK(rep.residuals["slope"] < 1e-12);

    // exponent range precondition
    CHECK_THROWS_AS(
        krylov_check({norms::zero_drift(3)}, one_fn(), MixedNormSpec(3, 2.0, 2.0), kc),
        DomainError);
}

TEST_CASE("holder moments: driftless slopes") {
    HolderConfig hc;
    hc.n_paths = 2000;
    hc.dt = 1e-3;
    hc.seed = 5;

    auto t = holder_moments(norms::zero_drift(3), 4.0, 0.45, HolderAxis::time, hc);
    CHECK(t.passed());
    CHECK(t.exponents["slope"] == doctest::Approx(2.0).epsilon(0.03));

    auto x = holder_moments(norms::zero_drift(3), 4.0, 0.45, HolderAxis::space, hc);
    CHECK(x.passed());
    CHECK(x.exponents["slope"] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(x.residuals["slope"] < 1e-9);

    HolderConfig coarse = hc;
    coarse.n_scales = 3;
    auto inc = holder_moments(norms::zero_drift(3), 4.0, 0.45, HolderAxis::time, coarse);
    CHECK(inc.verdict == Verdict::inconclusive);
}

TEST_CASE("holder moments: start-axis increments share absolute-step noise") {
    HolderConfig hc;
    hc.n_paths = 800;
    hc.dt = 1e-3;
    hc.t = 0.5;
    auto s = holder_moments(norms::ou_drift(3), 4.0, 0.45, HolderAxis::start, hc);
    // slope threshold beta (r - d) = 0.45; sqrt-scale increments give ~ r/2
    CHECK(s.passed());
    CHECK(s.exponents["slope"] > 0.45);
}

TEST_CASE("gradient moment: zero drift vanishes, linear drift fits theta ~ 1") {
    GradientMomentConfig gc;
    gc.x_grid = 3;
    gc.n_paths = 16;
    gc.dt = 1e-3;
    gc.t = 0.25;

    auto z = gradient_moment({norms::zero_drift(3)}, 2.0, 2.0, gc);
    CHECK(z.passed());
    for (const auto& row : z.rows)
        if (row.name == "quantity") CHECK(row.value == 0.0);

    auto lin = gradient_moment({norms::drift_catalog("linear", 3)}, 2.0, 2.0, gc);
    CHECK(lin.passed());
    CHECK(lin.exponents["theta_hat"] == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("malliavin statistics: zero-drift closed forms") {
    MalliavinConfig mc;
    mc.x_grid = 4;
    mc.n_paths = 32;
    mc.dt = 2e-3;
    mc.t = 0.5;
    auto rep = malliavin_stats({norms::zero_drift(3)}, 0.25, mc);
    CHECK(rep.passed());

    // A2 = d (t - s) |O| exactly: integrand |D|_F^2 = d on sigma <= t
    const double expect = 3.0 * 0.5 * std::pow(kTwoPi, 3);
    CHECK(rep.constants["A2_max"] == doctest::Approx(expect).epsilon(1e-6));
    // A3 vanishes identically: D is constant in sigma
    CHECK(rep.constants["A3_max"] == 0.0);

    MalliavinConfig coarse = mc;
    coarse.n_sigmas = 3;
    auto inc = malliavin_stats({norms::zero_drift(3)}, 0.25, coarse);
    CHECK(inc.verdict == Verdict::inconclusive);
}

TEST_CASE("cauchy convergence: identical levels are exactly zero") {
    CauchyConfig cc;
    cc.x_grid = 3;
    cc.n_paths = 24;
    cc.dt = 2e-3;
    cc.t = 0.25;
    // beyond-resolution kernels degenerate to the identity, so consecutive
    // gridded mollifications coincide and the distances vanish bitwise
    TorusGrid g(3, 12);
    DriftField base = norms::gridded(norms::shear_drift(3), g);
    DriftField l1 = norms::mollify(base, 64);
    DriftField l2 = norms::mollify(base, 128);
    auto rep = cauchy_convergence({l1, l2, l2}, cc);
    CHECK(rep.passed());
    for (const auto& row : rep.rows)
        if (row.name == "distance") CHECK(row.value == 0.0);

    CHECK_THROWS_AS(cauchy_convergence({l1}, cc), DomainError);
}

TEST_CASE("fitted exponents are bitwise reproducible") {
    HolderConfig hc;
    hc.n_paths = 400;
    hc.dt = 2e-3;
    hc.seed = 99;
    auto a = holder_moments(norms::ou_drift(3), 4.0, 0.45, HolderAxis::time, hc);
    auto b = holder_moments(norms::ou_drift(3), 4.0, 0.45, HolderAxis::time, hc);
    CHECK(a.exponents["slope"] == b.exponents["slope"]);
    CHECK(a.residuals["slope"] == b.residuals["slope"]);
}
