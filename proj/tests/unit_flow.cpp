#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "sflab/drift.hpp"
#include "sflab/errors.hpp"
#include "sflab/flow.hpp"
#include "sflab/rng.hpp"

using namespace sflab;
using namespace sflab::flow;
using norms::DriftField;

namespace {

constexpr double kPi = 3.14159265358979323846;

// scaling-and-squaring Taylor matrix exponential (test oracle)
Mat expm_oracle(const Mat& a, int dim) {
    double nrm = frobenius(a);
    int sq = 0;
    while (nrm > 0.5 && sq < 40) {
        nrm *= 0.5;
        ++sq;
    }
    Mat as = (1.0 / std::pow(2.0, sq)) * a;
    Mat term = mat_identity(dim);
    Mat sum = mat_identity(dim);
    for (int k = 1; k <= 22; ++k) {
        term = (1.0 / k) * matmul(term, as, dim);
        sum += term;
    }
    for (int s = 0; s < sq; ++s) sum = matmul(sum, sum, dim);
    return sum;
}

Mat test_matrix() {
    Mat a = mat_zero();
    a[1] = 1.0;
    a[3] = -1.0;
    a[8] = 0.5;
    return a;
}

} // namespace

TEST_CASE("counter rng: determinism and distribution") {
    CounterRng r1(42, 7), r2(42, 7), r3(43, 7);
    double a0, a1, b0, b1, c0, c1;
    r1.normal_pair(11, -5, 2, a0, a1);
    r2.normal_pair(11, -5, 2, b0, b1);
    r3.normal_pair(11, -5, 2, c0, c1);
    CHECK(a0 == b0);
    CHECK(a1 == b1);
    CHECK(a0 != c0);

    // quantile round trip against the complementary error function
    for (double u : {1e-10, 1e-4, 0.2, 0.5, 0.77, 1.0 - 1e-4, 1.0 - 1e-10}) {
        const double z = CounterRng::normal_quantile(u);
        CHECK(0.5 * std::erfc(-z / std::sqrt(2.0)) == doctest::Approx(u).epsilon(1e-11));
    }

    // moments over a big block
    double s = 0, s2 = 0;
    const long n = 200000;
    for (long k = 0; k < n; ++k) {
        double z0, z1;
        r1.normal_pair(k % 64, k / 64, 0, z0, z1);
        s += z0 + z1;
        s2 += z0 * z0 + z1 * z1;
    }
    CHECK(std::abs(s / (2 * n)) < 4.0 / std::sqrt(2.0 * n));
    CHECK(s2 / (2 * n) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("zero drift: paths equal summed increments bitwise") {
    FlowConfig fc;
    fc.t = 0.25;
    fc.dt = 1e-3;
    fc.n_paths = 64;
    fc.points = {{1.0, -2.0, 0.5}};
    fc.seed = 9;
    FlowEnsemble ens(norms::zero_drift(3), fc);
    for (int p = 0; p < fc.n_paths; ++p) {
        Vec x = fc.points[0];
        for (int k = 0; k < ens.n_steps(); ++k) {
            const Vec dw = ens.brownian_increment(0, p, k);
            for (int a = 0; a < 3; ++a) x[a] += 0.0 * fc.dt + dw[a];
        }
        for (int a = 0; a < 3; ++a) CHECK(x[a] == ens.state(0, 0, p)[a]);
    }
    CHECK(ens.noise_mean_ok());
}

TEST_CASE("constant drift: exact translation plus noise") {
    const Vec v = {1.0, 0.5, -0.25};
    FlowConfig fc;
    fc.t = 0.5;
    fc.dt = 1e-3;
    fc.n_paths = 16;
    fc.points = {{0.0, 0.0, 0.0}};
    fc.seed = 5;
    FlowEnsemble ens(norms::constant_drift(3, v), fc);
    FlowEnsemble zero(norms::zero_drift(3), fc);
    for (int p = 0; p < fc.n_paths; ++p) {
        // same increments, so the difference is the deterministic summed drift
        Vec drift_sum = vec_zero();
        for (int k = 0; k < ens.n_steps(); ++k)
            for (int a = 0; a < 3; ++a) drift_sum[a] += v[a] * fc.dt;
        for (int a = 0; a < 3; ++a)
            CHECK(ens.state(0, 0, p)[a] - zero.state(0, 0, p)[a] ==
                  doctest::Approx(drift_sum[a]).epsilon(1e-12));
    }
}

TEST_CASE("ou drift: closed-form moments within 3 SE") {
    FlowConfig fc;
    fc.t = 1.0;
    fc.dt = 1e-3;
    fc.n_paths = 8000;
    fc.points = {{1.5, -0.5, 0.75}};
    fc.seed = 2;
    FlowEnsemble ens(norms::ou_drift(3), fc);
    for (int a = 0; a < 3; ++a) {
        double s = 0, s2 = 0;
        for (int p = 0; p < fc.n_paths; ++p) {
            const double x = ens.state(0, 0, p)[a];
            s += x;
            s2 += x * x;
        }
        const double mean = s / fc.n_paths;
        const double var = s2 / fc.n_paths - mean * mean;
        const double se_mean = std::sqrt(var / fc.n_paths);
        const double se_var = var * std::sqrt(2.0 / fc.n_paths);
        CHECK(std::abs(mean - fc.points[0][a] * std::exp(-1.0)) < 3 * se_mean + 2 * fc.dt);
        CHECK(std::abs(var - 0.5 * (1 - std::exp(-2.0))) < 3 * se_var + 2 * fc.dt);
    }
}

TEST_CASE("restart composition is bitwise") {
    FlowConfig fc;
    fc.t = 1.0;
    fc.dt = 1e-3;
    fc.n_paths = 32;
    fc.points = {{0.2, 0.4, -0.6}};
    fc.checkpoints = {0.25, 1.0};
    fc.seed = 3;
    FlowEnsemble direct(norms::ou_drift(3), fc);
    FlowEnsemble res = restart_flow(direct, 0.25, 1.0);
    for (int p = 0; p < fc.n_paths; ++p)
        for (int a = 0; a < 3; ++a) CHECK(direct.state(1, 0, p)[a] == res.state(0, 0, p)[a]);

    CHECK_THROWS_AS(restart_flow(direct, 0.3, 1.0), DomainError);

    // zero drift: restart equals start plus increments regardless of r
    FlowEnsemble z(norms::zero_drift(3), fc);
    FlowEnsemble zr = restart_flow(z, 0.25, 1.0);
    for (int p = 0; p < 8; ++p)
        for (int a = 0; a < 3; ++a) CHECK(z.state(1, 0, p)[a] == zr.state(0, 0, p)[a]);
}

TEST_CASE("variational flow") {
    // zero drift: exactly the identity
    FlowConfig fc;
    fc.t = 0.5;
    fc.dt = 1e-3;
    fc.n_paths = 8;
    fc.points = {{0.0, 0.0, 0.0}};
    FlowEnsemble z(norms::zero_drift(3), fc);
    auto zg = variational_flow(z, norms::zero_drift(3));
    const Mat eye = mat_identity(3);
    for (int p = 0; p < 8; ++p) CHECK(frobenius(zg.at(0, 0, p) - eye) == 0.0);

    // linear drift: matrix exponential, deterministic
    const Mat a = test_matrix();
    DriftField lin = norms::linear_drift(3, a);
    fc.t = 1.0;
    FlowEnsemble ens(lin, fc);
    auto g = variational_flow(ens, lin);
    const Mat exact = expm_oracle(a, 3);
    for (int p = 0; p < 2; ++p)
        for (int i = 0; i < 9; ++i) CHECK(std::abs(g.at(0, 0, p)[i] - exact[i]) <= 2 * fc.dt);

    // missing gradient
    DriftField no_grad = norms::truncate(norms::ou_drift(3), 10.0);
    CHECK_THROWS_AS(variational_flow(ens, no_grad), CapabilityError);
}

TEST_CASE("variational flow against common-noise finite differences") {
    DriftField b = norms::taylor_green_drift(3);
    const double h = 1e-4;
    FlowConfig fc;
    fc.t = 0.5;
    fc.dt = 5e-4;
    fc.n_paths = 16;
    fc.points = {{kPi + 0.3, kPi - 0.2, kPi + 0.1},
                 {kPi + 0.3 + h, kPi - 0.2, kPi + 0.1},
                 {kPi + 0.3, kPi - 0.2 + h, kPi + 0.1},
                 {kPi + 0.3, kPi - 0.2, kPi + 0.1 + h}};
    fc.seed = 11;
    FlowEnsemble ens(b, fc);
    auto g = variational_flow(ens, b);
    for (int p = 0; p < fc.n_paths; ++p) {
        for (int col = 0; col < 3; ++col) {
            const Vec fd =
                (1.0 / h) * (ens.state(0, 1 + col, p) - ens.state(0, 0, p));
            for (int row = 0; row < 3; ++row)
                CHECK(std::abs(fd[row] - at(g.at(0, 0, p), row, col)) < 50 * (h + fc.dt));
        }
    }
}

TEST_CASE("chaos series for a linear drift") {
    const Mat a = test_matrix();
    DriftField lin = norms::linear_drift(3, a);
    FlowConfig fc;
    fc.t = 1.0;
    fc.dt = 1e-3;
    fc.n_paths = 2;
    fc.points = {{0.1, 0.2, 0.3}};
    FlowEnsemble ens(lin, fc);
    auto sums = chaos_series_gradient(ens, lin, 4);

    // S_0 = I exactly
    CHECK(frobenius(sums[0].at(0, 0, 0) - mat_identity(3)) == 0.0);

    // term n = A^n t^n / n! within 1%
    Mat an = mat_identity(3);
    double fact = 1.0;
    for (int n = 1; n <= 4; ++n) {
        an = matmul(an, a, 3);
        fact *= n;
        const Mat term = sums[n].at(0, 0, 0) - sums[n - 1].at(0, 0, 0);
        const Mat expect = (1.0 / fact) * an;
        CHECK(frobenius(term - expect) < 0.01 * frobenius(expect));
    }

    // partial sums approach the variational solution monotonically
    auto g = variational_flow(ens, lin);
    double prev = 1e300;
    for (int n = 0; n <= 4; ++n) {
        const double dist = frobenius(sums[n].at(0, 0, 0) - g.at(0, 0, 0));
        CHECK(dist <= prev + 1e-12);
        prev = dist;
    }

    // gradient-free drift: every term beyond S_0 vanishes exactly
    FlowEnsemble z(norms::zero_drift(3), fc);
    auto zs = chaos_series_gradient(z, norms::zero_drift(3), 3);
    for (int n = 1; n <= 3; ++n)
        CHECK(frobenius(zs[n].at(0, 0, 0) - zs[n - 1].at(0, 0, 0)) == 0.0);

    CHECK_THROWS_AS(chaos_series_gradient(ens, lin, 7), DomainError);
}

TEST_CASE("malliavin derivative") {
    FlowConfig fc;
    fc.t = 1.0;
    fc.dt = 1e-3;
    fc.n_paths = 4;
    fc.points = {{0.0, 0.0, 0.0}};
    fc.checkpoints = {0.5, 1.0};

    // zero drift: identity for sigma <= t, zero for sigma > checkpoint
    FlowEnsemble z(norms::zero_drift(3), fc);
    auto zm = malliavin_derivative(z, norms::zero_drift(3), {0.25, 0.75});
    const Mat eye = mat_identity(3);
    for (int p = 0; p < 4; ++p) {
        CHECK(frobenius(zm.at(1, 0, p, 0) - eye) == 0.0);  // sigma=0.25 at t=1
        CHECK(frobenius(zm.at(0, 0, p, 0) - eye) == 0.0);  // sigma=0.25 at t=0.5
        CHECK(frobenius(zm.at(0, 0, p, 1)) == 0.0);        // sigma=0.75 > 0.5
        CHECK(frobenius(zm.at(1, 0, p, 1) - eye) == 0.0);
    }

    // linear drift: expm(A (t - sigma)) to O(dt)
    const Mat a = test_matrix();
    DriftField lin = norms::linear_drift(3, a);
    FlowEnsemble ens(lin, fc);
    auto m = malliavin_derivative(ens, lin, {0.25});
    const Mat exact = expm_oracle(0.75 * a, 3);
    for (int i = 0; i < 9; ++i) CHECK(std::abs(m.at(1, 0, 0, 0)[i] - exact[i]) < 3 * fc.dt);

    CHECK_THROWS_AS(malliavin_derivative(ens, lin, {0.33333}), DomainError);
}

TEST_CASE("malliavin product identity") {
    // D_s X_t - D_s' X_t = D_s' X_t (D_s X_s' - I), s < s' <= t
    DriftField b = norms::taylor_green_drift(3);
    FlowConfig fc;
    fc.t = 1.0;
    fc.dt = 1e-3;
    fc.n_paths = 64;
    fc.points = {{kPi, kPi, kPi}};
    fc.checkpoints = {0.5, 1.0};
    fc.seed = 17;
    FlowEnsemble ens(b, fc);
    auto rec = malliavin_derivative(ens, b, {0.25, 0.5});
    const Mat eye = mat_identity(3);
    double worst = 0.0;
    for (int p = 0; p < fc.n_paths; ++p) {
        const Mat lhs = rec.at(1, 0, p, 0) - rec.at(1, 0, p, 1);
        const Mat rhs = matmul(rec.at(1, 0, p, 1), rec.at(0, 0, p, 0) - eye, 3);
        for (int i = 0; i < 9; ++i) worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
    }
    CHECK(worst <= 10 * fc.dt);
}

TEST_CASE("gaussian fourth-moment of time increments") {
    FlowConfig fc;
    fc.t = 1.0;
    fc.dt = 1e-3;
    fc.n_paths = 20000;
    fc.points = {{0, 0, 0}};
    fc.checkpoints = {0.5, 1.0};
    fc.seed = 23;
    FlowEnsemble ens(norms::zero_drift(3), fc);
    double s = 0, s2 = 0;
    for (int p = 0; p < fc.n_paths; ++p) {
        const Vec d = ens.state(1, 0, p) - ens.state(0, 0, p);
        const double v = std::pow(norm2(d), 4.0);
        s += v;
        s2 += v * v;
    }
    const double mean = s / fc.n_paths;
    const double se = std::sqrt(std::max(0.0, s2 / fc.n_paths - mean * mean) / fc.n_paths);
    CHECK(std::abs(mean - 3.75) < 3 * se);  // d(d+2)|t1-t2|^2 = 15 * 0.25
}

TEST_CASE("jacobian determinant properties") {
    // smooth drift, small horizon: det grad X > 0 on every path
    DriftField b = norms::taylor_green_drift(3);
    FlowConfig fc;
    fc.t = 0.5;  // |grad b|_inf <= ~1.8 so |grad b|(t-s) < 1
    fc.dt = 1e-3;
    fc.n_paths = 512;
    fc.points = {{kPi + 0.5, kPi, kPi - 0.7}};
    fc.seed = 31;
    FlowEnsemble ens(b, fc);
    auto g = variational_flow(ens, b);
    double det_sum = 0.0, det_sq = 0.0;
    for (int p = 0; p < fc.n_paths; ++p) {
        const double dj = det(g.at(0, 0, p), 3);
        CHECK(dj > 0.0);
        det_sum += dj;
        det_sq += dj * dj;
    }
    // divergence-free drift: sample mean of det within 3 SE of 1 (+O(dt))
    const double mean = det_sum / fc.n_paths;
    const double se =
        std::sqrt(std::max(0.0, det_sq / fc.n_paths - mean * mean) / fc.n_paths);
    CHECK(std::abs(mean - 1.0) < 3 * se + 10 * fc.dt);
}

TEST_CASE("parallelism independence of ensembles") {
    FlowConfig fc;
    fc.t = 0.25;
    fc.dt = 1e-3;
    fc.n_paths = 40;
    fc.points = {{0.3, 0.6, 0.9}, {1.0, 1.5, 2.0}};
    fc.seed = 77;
    setenv("SFLAB_WORKERS", "1", 1);
    FlowEnsemble e1(norms::ou_drift(3), fc);
    setenv("SFLAB_WORKERS", "3", 1);
    FlowEnsemble e3(norms::ou_drift(3), fc);
    setenv("SFLAB_WORKERS", "1", 1);
    for (int pt = 0; pt < 2; ++pt)
        for (int p = 0; p < fc.n_paths; ++p)
            for (int a = 0; a < 3; ++a) CHECK(e1.state(0, pt, p)[a] == e3.state(0, pt, p)[a]);
}

TEST_CASE("error paths and diagnostics") {
    DriftField bad;
    bad.dim = 3;
    bad.value = [](double, const Vec&) {
        return Vec{std::nan(""), 0.0, 0.0};
    };
    FlowConfig fc;
    fc.t = 0.1;
    fc.dt = 1e-2;
    fc.n_paths = 1;
    fc.points = {{0, 0, 0}};
    CHECK_THROWS_AS(FlowEnsemble(bad, fc), DataError);

    FlowConfig misaligned = fc;
    misaligned.t = 0.105;
    CHECK_THROWS_AS(FlowEnsemble(norms::zero_drift(3), misaligned), DomainError);

    FlowConfig badck = fc;
    badck.checkpoints = {0.055};
    CHECK_THROWS_AS(FlowEnsemble(norms::zero_drift(3), badck), DomainError);

    // escape diagnostic flags but does not abort
    FlowConfig esc = fc;
    esc.t = 1.0;
    esc.dt = 1e-2;
    esc.n_paths = 50;
    esc.escape_bound = 0.5;
    FlowEnsemble ens(norms::zero_drift(3), esc);
    CHECK(ens.escape_count() > 0);
}

TEST_CASE("antithetic pairing negates increments") {
    FlowConfig fc;
    fc.t = 0.1;
    fc.dt = 1e-2;
    fc.n_paths = 4;
    fc.points = {{0, 0, 0}};
    fc.antithetic = true;
    FlowEnsemble ens(norms::zero_drift(3), fc);
    for (int k = 0; k < ens.n_steps(); ++k) {
        const Vec d0 = ens.brownian_increment(0, 0, k);
        const Vec d1 = ens.brownian_increment(0, 1, k);
        for (int a = 0; a < 3; ++a) CHECK(d0[a] == -d1[a]);
    }
}
