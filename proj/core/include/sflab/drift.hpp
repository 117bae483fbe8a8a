#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sflab/linalg.hpp"
#include "sflab/mixed_norm.hpp"
#include "sflab/periodic_field.hpp"

namespace sflab::norms {

enum class Lineage { base, mollified, truncated };

/// Time-dependent vector field b(t, x) with optional analytic Jacobian
/// (entry (i,j) = d_j b^i) and approximation lineage.
struct DriftField {
    int dim = 3;
    std::function<Vec(double, const Vec&)> value;
    std::function<Mat(double, const Vec&)> jacobian;
    /// Fused evaluation, set when value and Jacobian share expensive work.
    std::function<void(double, const Vec&, Vec&, Mat&)> value_and_jacobian;

    bool smooth = false;
    bool divergence_free = false;
    bool periodic = false;       // 2pi-periodic in every coordinate
    bool time_constant = true;
    Lineage lineage = Lineage::base;
    double level = 0;            // m for mollified / truncated variants
    std::string name;

    struct GridBacking {
        TorusGrid grid;
        PeriodicField values;   // d components
        PeriodicField jac;      // d*d components (may be empty)
        bool has_jac = false;
    };
    std::shared_ptr<const GridBacking> backing;

    bool has_jacobian() const { return static_cast<bool>(jacobian); }
    Vec operator()(double t, const Vec& x) const { return value(t, x); }
};

/// Fixed smooth bump profile exp(-1/(1-|z|^2)) on |z|<1, normalized to unit
/// mass; at scale m the kernel has support radius 2/m.
class MollifierKernel {
public:
    MollifierKernel(int dim, int m);

    int dim() const { return dim_; }
    int scale() const { return m_; }
    double support() const { return 2.0 / m_; }

    double density(const Vec& y) const;
    Vec density_gradient(const Vec& y) const;
    /// Radial Fourier transform of the kernel at wavenumber magnitude kmag.
    double fourier(double kmag) const;
    /// Mass by high-order quadrature (for the unit-mass invariant).
    double mass_quadrature() const;

private:
    int dim_;
    int m_;
    double norm_; // profile normalization for this dimension
};

// ---- catalog -------------------------------------------------------------

DriftField zero_drift(int dim);
DriftField constant_drift(int dim, const Vec& v);
DriftField linear_drift(int dim, const Mat& a);
DriftField ou_drift(int dim);
DriftField shear_drift(int dim);
/// Smooth compactly supported attracting well -chi(|x-c|)(x-c) at the torus
/// midpoint; equals the plain mean-reverting drift near the center and is
/// 2pi-periodic, so it can couple to the spectral solvers.
DriftField ou_well_drift(int dim);
DriftField taylor_green_drift(int dim);
/// chi(x-c) (x-c)/|x-c|^{1+gamma} centered at the torus midpoint; in L^d for
/// every gamma < 1.
DriftField singular_drift(int dim, double gamma);

/// Lookup by string id ("zero", "constant", "linear", "ou", "shear",
/// "taylor_green", "singular"), with numeric parameters (e.g. gamma).
DriftField drift_catalog(const std::string& id, int dim,
                         const std::map<std::string, double>& params = {});

// ---- operators -----------------------------------------------------------

/// b * rho_m. Grid-backed fields are convolved by exact circular convolution
/// with the sampled kernel; analytic fields by fixed-order quadrature over
/// the kernel support. The result carries the kernel-differentiated Jacobian.
DriftField mollify(const DriftField& b, int m, int quad_order = 12);

/// b 1_{|b| <= m}; points with |b| = m are kept.
DriftField truncate(const DriftField& b, double m);

/// Exact circular convolution of a grid field with the sampled, discretely
/// normalized kernel (the grid path of mollify).
PeriodicField mollify_grid(const PeriodicField& f, int m);

/// Precomputes value (and Jacobian, when present) on a torus grid and returns
/// a multilinear-interpolation-backed field. Requires periodic b.
DriftField gridded(const DriftField& b, const TorusGrid& grid, double t_sample = 0.0);

/// b -> c*b, preserving lineage flags.
DriftField scaled(const DriftField& b, double c);

/// The approximating sequence at level m: plain mollification for
/// smooth-enough fields, truncate-then-mollify for unbounded ones.
DriftField approximating_drift(const DriftField& b, int m, int quad_order = 12);

/// Approximation level for the singular catalog family through a precomputed
/// fine radial table: truncate at |b| <= m, convolve with the scale-m kernel.
/// Resolves the kernel scale exactly for any m, unlike grid sampling.
DriftField singular_approximation_radial(int dim, double gamma, int m,
                                         int table_points = 2048);

// ---- remainder functionals -------------------------------------------------

/// K_b(m) = sup_t || b(t) - b(t) * rho_m ||_{L^d} over the given time
/// samples, computed on the grid-sampled field (the grid resolution is part
/// of the experiment configuration).
double remainder_K(const DriftField& b, int m, const TorusGrid& grid,
                   const std::vector<double>& time_samples);

/// || b - b 1_{|b|<=m} ||_{L^{p1}_{q1}([t0,t1])}.
double remainder_K_truncation(const DriftField& b, double m, const MixedNormSpec& spec,
                              const TorusGrid& grid, double t0, double t1, int nt);

/// omega_b(delta) = sup_{0<=S<=T-delta} || b ||_{L^{p1}_{q1}(S, S+delta)}.
double modulus_omega(const DriftField& b, double delta, const MixedNormSpec& spec,
                     const TorusGrid& grid, double T, int nt_per_window = 8,
                     int n_windows = 16);

/// Discrete Hardy-Littlewood maximal function of a scalar grid field:
/// max over dyadic radii (including the singleton radius h/2) of ball
/// averages of |f|.
PeriodicField maximal_function(const PeriodicField& f);

/// Multilinear periodic interpolation helper shared by gridded drifts.
Vec interp_linear(const PeriodicField& f, const Vec& x, int components, int first = 0);

} // namespace sflab::norms
