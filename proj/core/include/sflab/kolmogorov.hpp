#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sflab/drift.hpp"
#include "sflab/mixed_norm.hpp"
#include "sflab/periodic_field.hpp"
#include "sflab/report.hpp"

namespace sflab::pde {

using norms::DriftField;
using norms::MixedNormSpec;

/// Scalar space-time forcing; either g directly or in divergence form
/// g = d_axis F (used to realize H^{-1,p} data with smooth potentials).
struct Forcing {
    std::function<double(double, const Vec&)> g;
    std::function<double(double, const Vec&)> potential;
    int axis = -1;
    bool time_constant = true;
    std::string name;

    bool divergence_form() const { return axis >= 0; }
};

/// Smooth test function with spatial gradient (for the iterated-integral
/// duality and Krylov scalings).
struct TestFunction {
    std::function<double(double, const Vec&)> value;
    std::function<Vec(double, const Vec&)> gradient;
    bool time_constant = true;
    std::string name;
};

struct PdeGrid {
    TorusGrid grid;
    double dt = 1e-3;
    int store_every = 0;      // 0 = pick a stride giving <= 65 stored frames
    double zero_order = 0.0;  // extra +lambda u absorbed into the exponential factor
};

/// Backward solve output: stored frames of u, its residual-form time
/// derivative, and the forcing samples, all on the same stored time grid.
struct PDESolveReport {
    TorusGrid grid;
    double S0 = 0.0, S1 = 1.0, dt = 1e-3;
    SpaceTimeField u;
    SpaceTimeField ut;
    SpaceTimeField f;

    /// { "u_high": ||u||_{H^{alpha+2,p}_q}, "ut": ||d_t u||_{H^{alpha,p}_q},
    ///   "f": ||f||_{H^{alpha,p}_q}, "ratio": (ut + u_high) / f }.
    std::map<std::string, double> norm_table(const MixedNormSpec& spec, double alpha) const;
};

struct NormResult {
    double value = 0.0;
    bool accuracy_warning = false;  // top-third spectral mass above 10%
};

/// || (1-Laplace)^{order/2} u ||_{L^q_t L^p_x} over [t0, t1]; order = 0 falls
/// through to mixed_norm bit for bit.
NormResult fractional_sobolev_norm(const SpaceTimeField& u, double order,
                                   const MixedNormSpec& spec, double t0, double t1);

/// IMEX solve of  d_t u + Laplace u / 2 + b . grad u + g = 0,  u(S1) = 0,
/// marched in reversed time with the diffusion factor applied exactly.
PDESolveReport solve_backward(const DriftField& b, const Forcing& g, double S0, double S1,
                              const PdeGrid& cfg);

struct AprioriConfig {
    PdeGrid pde;
    double S0 = 0.0, S1 = 1.0;
    MixedNormSpec spec;
    double alpha = 0.0;  // 0 or -1
    double spread_tolerance = 2.0;
};

/// Ratio (||d_t u|| + ||u||_{H^{alpha+2,p}_q}) / ||f||_{H^{alpha,p}_q} per
/// forcing and mollification level; pass when the ratio spread across levels
/// stays within the configured factor.
EstimateReport apriori_probe(const std::vector<DriftField>& b_levels,
                             const std::vector<Forcing>& forcings, const AprioriConfig& cfg);

struct FeynmanKacConfig {
    PdeGrid pde;
    double S0 = 0.0, S1 = 0.5;
    std::vector<Vec> xs;
    int n_paths = 100000;
    std::uint64_t seed = 1;
    double tol_dt_coeff = 5.0;
};

/// Monte Carlo E int_t^{S1} g(s, X_s) ds against u(t, X_t) from the backward
/// solve, at t = S0 where X_{S0} = x.
EstimateReport feynman_kac_check(const DriftField& b, const Forcing& g,
                                 const FeynmanKacConfig& cfg);

struct DualityConfig {
    PdeGrid pde;
    double S0 = 0.0, S1 = 0.5;
    std::vector<Vec> xs;
    int n_paths = 50000;
    std::uint64_t seed = 1;
    double lp_exponent = 2.0;
    std::vector<double> window_fractions = {1.0, 0.5, 0.25, 0.125};
    double tol_dt_coeff = 10.0;
};

/// Time-ordered simplex integral of prod d_{alpha_i} f_i along paths (MC)
/// against the nested backward PDE recursion value u_1(S0, x); also fits the
/// window-exponent of the L^p_x norm of the PDE side.
EstimateReport iterated_integral_duality(int n, const std::vector<TestFunction>& fs,
                                         const std::vector<int>& axes, const DriftField& b,
                                         const DualityConfig& cfg);

struct EmbeddingCase {
    enum class Kind { sobolev1, sobolev2, morrey };
    Kind kind = Kind::sobolev1;
    double alpha = 0.0;
    double r = 4.0, s = 4.0;  // target exponents for the Sobolev cases
    double theta = 0.25;      // Morrey smoothing order
};

/// Left/right sides of the parabolic Sobolev and Morrey inequalities on a
/// stored solution; reports the worst-case ratios.
EstimateReport parabolic_embedding_probe(const PDESolveReport& sol, const MixedNormSpec& spec,
                                         const std::vector<EmbeddingCase>& cases);

// convenient single-mode forcings
Forcing cosine_forcing(int k_axis, int wavenumber = 1);
Forcing constant_forcing(double c);
TestFunction cosine_test(int k_axis, int wavenumber = 1);
TestFunction sine_test(int k_axis, int wavenumber = 1);

} // namespace sflab::pde
