#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "sflab/grid.hpp"
#include "sflab/linalg.hpp"

namespace sflab {

/// Scalar or vector field on a periodic grid with a cached spectral
/// representation. Nodal storage is component-major; spectra are computed
/// lazily and invalidated by mutable access.
class PeriodicField {
public:
    PeriodicField() = default;
    PeriodicField(TorusGrid grid, int components);

    static PeriodicField sample_scalar(const TorusGrid& grid,
                                       const std::function<double(const Vec&)>& f);
    static PeriodicField sample_vector(const TorusGrid& grid,
                                       const std::function<Vec(const Vec&)>& f);
    /// Inverse-transforms the given spectra; rejects fields whose imaginary
    /// residue exceeds 1e-10 relative to max(result scale, ref_scale). Pass
    /// the source field's scale when an operator may annihilate the result.
    static PeriodicField from_spectrum(const TorusGrid& grid, int components,
                                       const std::vector<std::vector<std::complex<double>>>& spectra,
                                       double ref_scale = 0.0);

    const TorusGrid& grid() const { return grid_; }
    int components() const { return components_; }
    std::size_t nodes() const { return grid_.size(); }

    double value(std::size_t node, int c = 0) const { return data_[slab(c) + node]; }
    double& value_mut(std::size_t node, int c = 0) {
        spectra_valid_ = false;
        return data_[slab(c) + node];
    }
    const double* component_data(int c) const { return data_.data() + slab(c); }

    Vec vector_value(std::size_t node) const {
        Vec v = vec_zero();
        for (int c = 0; c < components_ && c < 3; ++c) v[c] = value(node, c);
        return v;
    }

    /// Unnormalized forward DFT coefficients of one component.
    const std::vector<std::complex<double>>& spectrum(int c = 0) const;

    // ---- spectral operators (all return new fields) ----
    PeriodicField bessel(double order) const;          // (1+|k|^2)^{order/2}
    PeriodicField derivative(int axis) const;          // ik multiplier, per component
    PeriodicField laplacian() const;
    PeriodicField component(int c) const;
    PeriodicField leray_projected() const;             // vector fields only
    PeriodicField upsampled(int factor) const;         // zero-padded refinement
    PeriodicField shifted(int axis, int cells) const;  // exact circular shift
    /// Zeroes every mode with any |k_a| above the cut.
    PeriodicField band_filtered(int cut) const;
    /// Jacobian of a vector field: d*d components, entry i*d+j = d_j u^i.
    PeriodicField jacobian() const;

    // ---- pointwise / quadrature queries ----
    /// Trigonometric interpolation, exact at grid nodes.
    double eval(const Vec& x, int c = 0) const;
    Vec eval_vector(const Vec& x) const;

    /// L^p grid norm of the pointwise magnitude; p = infinity gives the max.
    double lp_norm(double p) const;
    double linf() const { return lp_norm(std::numeric_limits<double>::infinity()); }
    double l2_inner(const PeriodicField& other) const;

    /// Relative spectral divergence of a vector field (0 for gradients-free).
    double divergence_rel() const;
    /// Fraction of spectral energy carried by the top third of frequencies.
    double tail_fraction() const;
    double max_abs() const;
    bool has_nan() const;

    // ---- arithmetic ----
    PeriodicField& operator+=(const PeriodicField& o);
    PeriodicField& operator-=(const PeriodicField& o);
    PeriodicField& operator*=(double s);
    friend PeriodicField operator+(PeriodicField a, const PeriodicField& b) { return a += b; }
    friend PeriodicField operator-(PeriodicField a, const PeriodicField& b) { return a -= b; }
    friend PeriodicField operator*(double s, PeriodicField a) { return a *= s; }

private:
    TorusGrid grid_;
    int components_ = 0;
    std::vector<double> data_;
    mutable std::vector<std::vector<std::complex<double>>> spectra_;
    mutable bool spectra_valid_ = false;

    std::size_t slab(int c) const { return static_cast<std::size_t>(c) * grid_.size(); }
    PeriodicField apply_multiplier(const std::function<std::complex<double>(const int*)>& mult) const;
};

/// Uniformly sampled space-time field (frames at ascending times).
struct SpaceTimeField {
    std::vector<double> times;
    std::vector<PeriodicField> frames;

    bool empty() const { return times.empty(); }
    const PeriodicField& frame_at(double t, double tol = 1e-9) const;
};

} // namespace sflab
