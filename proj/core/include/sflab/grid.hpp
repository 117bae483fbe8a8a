#pragma once

#include <cstddef>
#include <cmath>

#include "sflab/errors.hpp"
#include "sflab/linalg.hpp"

namespace sflab {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Uniform N^d grid on the periodic box [0, 2pi)^d, d in {1,2,3}.
struct TorusGrid {
    int dim = 3;
    int n = 32;

    TorusGrid() = default;
    TorusGrid(int dim_, int n_) : dim(dim_), n(n_) {
        if (dim < 1 || dim > 3) throw DomainError("TorusGrid: dim must be 1, 2 or 3");
        if (n < 2) throw DomainError("TorusGrid: need at least 2 nodes per dimension");
    }

    double spacing() const { return kTwoPi / n; }
    double volume() const { return std::pow(kTwoPi, dim); }
    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < dim; ++i) s *= static_cast<std::size_t>(n);
        return s;
    }
    double cell_volume() const { return volume() / static_cast<double>(size()); }

    /// Flat index of integer coordinates (row-major, axis 0 slowest).
    std::size_t index(int ix, int iy = 0, int iz = 0) const {
        std::size_t f = static_cast<std::size_t>(ix);
        if (dim > 1) f = f * n + iy;
        if (dim > 2) f = f * n + iz;
        return f;
    }

    void coords(std::size_t flat, int out[3]) const {
        out[0] = out[1] = out[2] = 0;
        for (int a = dim - 1; a >= 0; --a) {
            out[a] = static_cast<int>(flat % n);
            flat /= n;
        }
    }

    Vec node(std::size_t flat) const {
        int c[3];
        coords(flat, c);
        const double h = spacing();
        Vec x = vec_zero();
        for (int a = 0; a < dim; ++a) x[a] = c[a] * h;
        return x;
    }

    /// Signed wavenumber for spectral index i (even n: Nyquist maps to -n/2).
    int wavenumber(int i) const { return (i < (n + 1) / 2) ? i : i - n; }

    /// Wrap a point into [0, 2pi)^d.
    Vec wrap(const Vec& x) const {
        Vec y = x;
        for (int a = 0; a < dim; ++a) {
            y[a] = std::fmod(y[a], kTwoPi);
            if (y[a] < 0) y[a] += kTwoPi;
        }
        return y;
    }

    bool operator==(const TorusGrid& o) const { return dim == o.dim && n == o.n; }
};

} // namespace sflab
