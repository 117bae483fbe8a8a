#include "sflab/periodic_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sflab/errors.hpp"
#include "sflab/spectral.hpp"

namespace sflab {

PeriodicField::PeriodicField(TorusGrid grid, int components)
    : grid_(grid), components_(components),
      data_(grid.size() * static_cast<std::size_t>(components), 0.0) {
    if (components < 1 || components > 9) throw DomainError("PeriodicField: bad component count");
}

PeriodicField PeriodicField::sample_scalar(const TorusGrid& grid,
                                           const std::function<double(const Vec&)>& f) {
    PeriodicField out(grid, 1);
    const std::size_t nn = grid.size();
    for (std::size_t i = 0; i < nn; ++i) out.data_[i] = f(grid.node(i));
    return out;
}

PeriodicField PeriodicField::sample_vector(const TorusGrid& grid,
                                           const std::function<Vec(const Vec&)>& f) {
    PeriodicField out(grid, grid.dim);
    const std::size_t nn = grid.size();
    for (std::size_t i = 0; i < nn; ++i) {
        const Vec v = f(grid.node(i));
        for (int c = 0; c < grid.dim; ++c) out.data_[out.slab(c) + i] = v[c];
    }
    return out;
}

PeriodicField PeriodicField::from_spectrum(
    const TorusGrid& grid, int components,
    const std::vector<std::vector<std::complex<double>>>& spectra, double ref_scale) {
    PeriodicField out(grid, components);
    const std::size_t nn = grid.size();
    std::vector<std::complex<double>> buf(nn);
    for (int c = 0; c < components; ++c) {
        buf = spectra[static_cast<std::size_t>(c)];
        spectral::inverse(grid.dim, grid.n, buf.data());
        double imax = 0.0, rmax = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            imax = std::max(imax, std::abs(buf[i].imag()));
            rmax = std::max(rmax, std::abs(buf[i].real()));
        }
        if (imax > 1e-10 * std::max({rmax, ref_scale, 1e-30}))
            throw DataError("PeriodicField: imaginary residue above 1e-10 relative");
        for (std::size_t i = 0; i < nn; ++i) out.data_[out.slab(c) + i] = buf[i].real();
    }
    out.spectra_ = spectra;
    out.spectra_valid_ = true;
    return out;
}

const std::vector<std::complex<double>>& PeriodicField::spectrum(int c) const {
    if (!spectra_valid_) {
        spectra_.assign(static_cast<std::size_t>(components_), {});
        const std::size_t nn = grid_.size();
        for (int comp = 0; comp < components_; ++comp) {
            auto& s = spectra_[static_cast<std::size_t>(comp)];
            s.resize(nn);
            const double* src = component_data(comp);
            for (std::size_t i = 0; i < nn; ++i) s[i] = src[i];
            spectral::forward(grid_.dim, grid_.n, s.data());
        }
        spectra_valid_ = true;
    }
    return spectra_[static_cast<std::size_t>(c)];
}

PeriodicField PeriodicField::apply_multiplier(
    const std::function<std::complex<double>(const int*)>& mult) const {
    const std::size_t nn = grid_.size();
    std::vector<std::vector<std::complex<double>>> out(static_cast<std::size_t>(components_));
    for (int c = 0; c < components_; ++c) {
        out[static_cast<std::size_t>(c)] = spectrum(c);
    }
    int idx[3];
    for (std::size_t i = 0; i < nn; ++i) {
        grid_.coords(i, idx);
        int k[3] = {0, 0, 0};
        for (int a = 0; a < grid_.dim; ++a) k[a] = grid_.wavenumber(idx[a]);
        const std::complex<double> m = mult(k);
        for (int c = 0; c < components_; ++c) out[static_cast<std::size_t>(c)][i] *= m;
    }
    return from_spectrum(grid_, components_, out, max_abs());
}

PeriodicField PeriodicField::bessel(double order) const {
    return apply_multiplier([order](const int* k) {
        const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1] +
                          static_cast<double>(k[2]) * k[2];
        return std::complex<double>(std::pow(1.0 + k2, order / 2.0), 0.0);
    });
}

PeriodicField PeriodicField::derivative(int axis) const {
    const int nyq = grid_.n / 2;
    const bool even = (grid_.n % 2 == 0);
    return apply_multiplier([axis, nyq, even](const int* k) {
        // Nyquist mode dropped: an odd multiplier there breaks realness
        if (even && k[axis] == -nyq) return std::complex<double>(0.0, 0.0);
        return std::complex<double>(0.0, static_cast<double>(k[axis]));
    });
}

PeriodicField PeriodicField::laplacian() const {
    return apply_multiplier([](const int* k) {
        const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1] +
                          static_cast<double>(k[2]) * k[2];
        return std::complex<double>(-k2, 0.0);
    });
}

PeriodicField PeriodicField::component(int c) const {
    PeriodicField out(grid_, 1);
    const std::size_t nn = grid_.size();
    std::copy_n(component_data(c), nn, out.data_.begin());
    return out;
}

PeriodicField PeriodicField::leray_projected() const {
    if (components_ != grid_.dim)
        throw DomainError("leray_projected: needs a d-component vector field");
    const std::size_t nn = grid_.size();
    std::vector<std::vector<std::complex<double>>> out(static_cast<std::size_t>(components_));
    for (int c = 0; c < components_; ++c) out[static_cast<std::size_t>(c)] = spectrum(c);
    const int nyq = grid_.n / 2;
    const bool even = (grid_.n % 2 == 0);
    int idx[3];
    for (std::size_t i = 0; i < nn; ++i) {
        grid_.coords(i, idx);
        double k[3] = {0, 0, 0};
        double k2 = 0.0;
        bool nyquist = false;
        for (int a = 0; a < grid_.dim; ++a) {
            k[a] = grid_.wavenumber(idx[a]);
            k2 += k[a] * k[a];
            if (even && idx[a] == nyq) nyquist = true;
        }
        if (k2 == 0.0) continue; // mean flow passes through
        if (nyquist) {
            // the direction of a Nyquist mode is sign-ambiguous; dropping it
            // keeps the projection real, idempotent and self-adjoint
            for (int a = 0; a < grid_.dim; ++a) out[static_cast<std::size_t>(a)][i] = 0.0;
            continue;
        }
        std::complex<double> kdotF(0.0, 0.0);
        for (int a = 0; a < grid_.dim; ++a) kdotF += k[a] * out[static_cast<std::size_t>(a)][i];
        for (int a = 0; a < grid_.dim; ++a)
            out[static_cast<std::size_t>(a)][i] -= (k[a] / k2) * kdotF;
    }
    return from_spectrum(grid_, components_, out, max_abs());
}

PeriodicField PeriodicField::upsampled(int factor) const {
    if (factor < 1) throw DomainError("upsampled: factor must be >= 1");
    if (factor == 1) return *this;
    const int n = grid_.n;
    const int m = n * factor;
    TorusGrid big(grid_.dim, m);
    const std::size_t big_nn = big.size();
    const double scale = std::pow(static_cast<double>(factor), grid_.dim);
    const int nyq = n / 2;
    const bool even = (n % 2 == 0);

    std::vector<std::vector<std::complex<double>>> out(static_cast<std::size_t>(components_));
    for (int c = 0; c < components_; ++c) {
        out[static_cast<std::size_t>(c)].assign(big_nn, {0.0, 0.0});
        const auto& src = spectrum(c);
        int idx[3];
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            grid_.coords(i, idx);
            // Nyquist coefficients are split evenly between +-n/2
            int kopts[3][2];
            int nopts[3];
            double w = 1.0;
            for (int a = 0; a < grid_.dim; ++a) {
                const int k = grid_.wavenumber(idx[a]);
                if (even && k == -nyq) {
                    kopts[a][0] = -nyq;
                    kopts[a][1] = nyq;
                    nopts[a] = 2;
                    w *= 0.5;
                } else {
                    kopts[a][0] = k;
                    nopts[a] = 1;
                }
            }
            const std::complex<double> amp = src[i] * (w * scale);
            int sel[3] = {0, 0, 0};
            while (true) {
                int bidx[3] = {0, 0, 0};
                for (int a = 0; a < grid_.dim; ++a) {
                    const int k = kopts[a][sel[a]];
                    bidx[a] = (k >= 0) ? k : m + k;
                }
                out[static_cast<std::size_t>(c)][big.index(bidx[0], bidx[1], bidx[2])] += amp;
                int a = 0;
                for (; a < grid_.dim; ++a) {
                    if (++sel[a] < nopts[a]) break;
                    sel[a] = 0;
                }
                if (a == grid_.dim) break;
            }
        }
    }
    return from_spectrum(big, components_, out, max_abs());
}

PeriodicField PeriodicField::shifted(int axis, int cells) const {
    PeriodicField out(grid_, components_);
    const int n = grid_.n;
    int idx[3];
    for (int c = 0; c < components_; ++c) {
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            grid_.coords(i, idx);
            int j[3] = {idx[0], idx[1], idx[2]};
            j[axis] = ((idx[axis] + cells) % n + n) % n;
            out.data_[out.slab(c) + grid_.index(j[0], j[1], j[2])] = data_[slab(c) + i];
        }
    }
    return out;
}

PeriodicField PeriodicField::band_filtered(int cut) const {
    return apply_multiplier([cut](const int* k) {
        for (int a = 0; a < 3; ++a)
            if (std::abs(k[a]) > cut) return std::complex<double>(0.0, 0.0);
        return std::complex<double>(1.0, 0.0);
    });
}

PeriodicField PeriodicField::jacobian() const {
    if (components_ != grid_.dim) throw DomainError("jacobian: needs a d-component vector field");
    const int d = grid_.dim;
    PeriodicField out(grid_, d * d);
    for (int i = 0; i < d; ++i) {
        PeriodicField di = component(i);
        for (int j = 0; j < d; ++j) {
            PeriodicField dij = di.derivative(j);
            std::copy_n(dij.component_data(0), grid_.size(),
                        out.data_.begin() + out.slab(i * d + j));
        }
    }
    return out;
}

double PeriodicField::eval(const Vec& x, int c) const {
    const auto& spec = spectrum(c);
    const int n = grid_.n;
    const int d = grid_.dim;
    const int nyq = n / 2;
    const bool even = (n % 2 == 0);
    // per-axis mode bases; the Nyquist entry uses cos so the interpolant is real
    std::vector<std::complex<double>> basis(static_cast<std::size_t>(d) * n);
    for (int a = 0; a < d; ++a) {
        for (int i = 0; i < n; ++i) {
            const int k = grid_.wavenumber(i);
            if (even && k == -nyq)
                basis[static_cast<std::size_t>(a) * n + i] = {std::cos(nyq * x[a]), 0.0};
            else
                basis[static_cast<std::size_t>(a) * n + i] = std::polar(1.0, k * x[a]);
        }
    }
    std::complex<double> acc(0.0, 0.0);
    int idx[3];
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        grid_.coords(i, idx);
        std::complex<double> b = basis[static_cast<std::size_t>(0) * n + idx[0]];
        for (int a = 1; a < d; ++a) b *= basis[static_cast<std::size_t>(a) * n + idx[a]];
        acc += spec[i] * b;
    }
    return acc.real() / static_cast<double>(grid_.size());
}

Vec PeriodicField::eval_vector(const Vec& x) const {
    Vec v = vec_zero();
    for (int c = 0; c < components_ && c < 3; ++c) v[c] = eval(x, c);
    return v;
}

double PeriodicField::lp_norm(double p) const {
    const std::size_t nn = grid_.size();
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            double s = 0.0;
            for (int c = 0; c < components_; ++c) {
                const double v = data_[slab(c) + i];
                s += v * v;
            }
            m = std::max(m, std::sqrt(s));
        }
        return m;
    }
    if (p <= 0) throw DomainError("lp_norm: p must be positive or infinity");
    double acc = 0.0;
    for (std::size_t i = 0; i < nn; ++i) {
        double s = 0.0;
        for (int c = 0; c < components_; ++c) {
            const double v = data_[slab(c) + i];
            s += v * v;
        }
        acc += std::pow(std::sqrt(s), p);
    }
    return std::pow(acc * grid_.cell_volume(), 1.0 / p);
}

double PeriodicField::l2_inner(const PeriodicField& other) const {
    if (!(grid_ == other.grid_) || components_ != other.components_)
        throw DomainError("l2_inner: mismatched fields");
    double acc = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
    return acc * grid_.cell_volume();
}

double PeriodicField::divergence_rel() const {
    if (components_ != grid_.dim) throw DomainError("divergence_rel: needs a vector field");
    double num = 0.0, den = 0.0;
    int idx[3];
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        grid_.coords(i, idx);
        double k[3] = {0, 0, 0};
        double k2 = 0.0;
        for (int a = 0; a < grid_.dim; ++a) {
            k[a] = grid_.wavenumber(idx[a]);
            k2 += k[a] * k[a];
        }
        std::complex<double> kdotF(0.0, 0.0);
        double f2 = 0.0;
        for (int a = 0; a < grid_.dim; ++a) {
            const auto v = spectrum(a)[i];
            kdotF += k[a] * v;
            f2 += std::norm(v);
        }
        num += std::norm(kdotF);
        den += k2 * f2;
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

double PeriodicField::tail_fraction() const {
    const int cut = grid_.n / 3;
    double tail = 0.0, total = 0.0;
    int idx[3];
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        grid_.coords(i, idx);
        bool high = false;
        for (int a = 0; a < grid_.dim; ++a)
            if (std::abs(grid_.wavenumber(idx[a])) > cut) high = true;
        for (int c = 0; c < components_; ++c) {
            const double e = std::norm(spectrum(c)[i]);
            total += e;
            if (high) tail += e;
        }
    }
    return total > 0.0 ? tail / total : 0.0;
}

double PeriodicField::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool PeriodicField::has_nan() const {
    for (double v : data_)
        if (std::isnan(v)) return true;
    return false;
}

PeriodicField& PeriodicField::operator+=(const PeriodicField& o) {
    if (!(grid_ == o.grid_) || components_ != o.components_)
        throw DomainError("field arithmetic: mismatched fields");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    spectra_valid_ = false;
    return *this;
}

PeriodicField& PeriodicField::operator-=(const PeriodicField& o) {
    if (!(grid_ == o.grid_) || components_ != o.components_)
        throw DomainError("field arithmetic: mismatched fields");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    spectra_valid_ = false;
    return *this;
}

PeriodicField& PeriodicField::operator*=(double s) {
    for (double& v : data_) v *= s;
    spectra_valid_ = false;
    return *this;
}

const PeriodicField& SpaceTimeField::frame_at(double t, double tol) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= tol) return frames[i];
    throw DomainError("SpaceTimeField: no frame stored at requested time");
}

} // namespace sflab
