#include "sflab/drift.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "sflab/errors.hpp"

namespace sflab::norms {

namespace {

// ---- small quadrature helpers ---------------------------------------------

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2 == 1) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

// integral of the unnormalized bump over the unit ball in d dimensions
double bump_mass(int dim) {
    const double surf = (dim == 1) ? 2.0 : (dim == 2 ? 2.0 * M_PI : 4.0 * M_PI);
    return simpson(
        [dim](double r) {
            return bump(r * r) * (dim == 1 ? 1.0 : (dim == 2 ? r : r * r));
        },
        0.0, 1.0, 2000) * surf;
}

double profile_norm(int dim) {
    static std::array<double, 4> cache = {0, 0, 0, 0};
    static std::once_flag flags[4];
    std::call_once(flags[dim], [dim] { cache[dim] = 1.0 / bump_mass(dim); });
    return cache[dim];
}

// axis marginal of the normalized profile, tabulated for fourier()
struct Marginal {
    std::vector<double> u;
    std::vector<double> g;
};

const Marginal& profile_marginal(int dim) {
    static std::array<Marginal, 4> cache;
    static std::once_flag flags[4];
    std::call_once(flags[dim], [dim] {
        const int nu = 1024;
        Marginal mg;
        mg.u.resize(nu + 1);
        mg.g.resize(nu + 1);
        const double c = profile_norm(dim);
        for (int i = 0; i <= nu; ++i) {
            const double u = -1.0 + 2.0 * i / nu;
            mg.u[i] = u;
            const double rmax2 = 1.0 - u * u;
            if (rmax2 <= 0.0) {
                mg.g[i] = 0.0;
                continue;
            }
            const double rmax = std::sqrt(rmax2);
            double val = 0.0;
            if (dim == 1) {
                val = bump(u * u);
            } else if (dim == 2) {
                val = 2.0 * simpson([u](double v) { return bump(u * u + v * v); }, 0.0, rmax, 512);
            } else {
                val = 2.0 * M_PI *
                      simpson([u](double r) { return bump(u * u + r * r) * r; }, 0.0, rmax, 512);
            }
            mg.g[i] = c * val;
        }
        cache[dim] = std::move(mg);
    });
    return cache[dim];
}

// ---- quadrature-backed mollification ---------------------------------------

struct QuadMollifier {
    int dim;
    DriftField base;
    std::vector<Vec> nodes;
    std::vector<double> w_val;  // normalized so constants are preserved exactly
    std::vector<Vec> w_grad;

    QuadMollifier(const DriftField& b, const MollifierKernel& kernel, int order) : dim(b.dim), base(b) {
        std::vector<double> gx, gw;
        gauss_legendre(order, gx, gw);
        const double s = kernel.support();
        const int total = static_cast<int>(std::pow(order, dim));
        nodes.reserve(total);
        w_val.reserve(total);
        w_grad.reserve(total);
        double mass = 0.0;
        int sel[3] = {0, 0, 0};
        for (int q = 0; q < total; ++q) {
            Vec y = vec_zero();
            double wq = 1.0;
            for (int a = 0; a < dim; ++a) {
                y[a] = s * gx[sel[a]];
                wq *= s * gw[sel[a]];
            }
            const double rho = kernel.density(y);
            if (rho > 0.0) {
                nodes.push_back(y);
                w_val.push_back(wq * rho);
                w_grad.push_back(wq * kernel.density_gradient(y));
                mass += wq * rho;
            }
            for (int a = 0; a < dim; ++a) {
                if (++sel[a] < order) break;
                sel[a] = 0;
            }
        }
        for (double& w : w_val) w /= mass;
    }

    Vec value(double t, const Vec& x) const {
        Vec acc = vec_zero();
        for (std::size_t q = 0; q < nodes.size(); ++q) acc += w_val[q] * base.value(t, x - nodes[q]);
        return acc;
    }

    void value_jac(double t, const Vec& x, Vec& v, Mat& j) const {
        v = vec_zero();
        j = mat_zero();
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const Vec bv = base.value(t, x - nodes[q]);
            v += w_val[q] * bv;
            for (int i = 0; i < dim; ++i)
                for (int a = 0; a < dim; ++a) j[3 * i + a] += bv[i] * w_grad[q][a];
        }
    }
};

// circular convolution of a grid field with the sampled, discretely
// normalized kernel; fixed summation order keeps shifts bit-exact
PeriodicField stencil_convolve(const PeriodicField& f, const MollifierKernel& kernel) {
    const TorusGrid& g = f.grid();
    const double h = g.spacing();
    const int reach = static_cast<int>(std::floor(kernel.support() / h));
    std::vector<std::array<int, 3>> offs;
    std::vector<double> w;
    double mass = 0.0;
    int d0 = (g.dim > 0) ? reach : 0, d1 = (g.dim > 1) ? reach : 0, d2 = (g.dim > 2) ? reach : 0;
    for (int i = -d0; i <= d0; ++i)
        for (int j = -d1; j <= d1; ++j)
            for (int k = -d2; k <= d2; ++k) {
                Vec y = {i * h, j * h, k * h};
                const double rho = kernel.density(y);
                if (rho > 0.0) {
                    offs.push_back({i, j, k});
                    w.push_back(rho);
                    mass += rho;
                }
            }
    if (offs.empty()) {
        offs.push_back({0, 0, 0});
        w.push_back(1.0);
        mass = 1.0;
    }
    for (double& v : w) v /= mass;

    PeriodicField out(g, f.components());
    const int n = g.n;
    int c3[3];
    for (std::size_t node = 0; node < g.size(); ++node) {
        g.coords(node, c3);
        for (int c = 0; c < f.components(); ++c) {
            double acc = 0.0;
            for (std::size_t q = 0; q < offs.size(); ++q) {
                int jj[3] = {0, 0, 0};
                for (int a = 0; a < g.dim; ++a)
                    jj[a] = ((c3[a] - offs[q][a]) % n + n) % n;
                acc += w[q] * f.value(g.index(jj[0], jj[1], jj[2]), c);
            }
            out.value_mut(node, c) = acc;
        }
    }
    return out;
}

DriftField grid_backed_field(const TorusGrid& grid, PeriodicField values, PeriodicField jac,
                             bool has_jac, const DriftField& like) {
    auto backing = std::make_shared<DriftField::GridBacking>();
    backing->grid = grid;
    backing->values = std::move(values);
    backing->jac = std::move(jac);
    backing->has_jac = has_jac;

    DriftField out = like;
    const int d = like.dim;
    out.backing = backing;
    out.periodic = true;
    out.time_constant = true;
    out.value = [backing, d](double, const Vec& x) {
        return interp_linear(backing->values, x, d);
    };
    if (has_jac) {
        out.jacobian = [backing, d](double, const Vec& x) {
            Mat m = mat_zero();
            for (int i = 0; i < d; ++i) {
                const Vec row = interp_linear(backing->jac, x, d, i * d);
                for (int j = 0; j < d; ++j) m[3 * i + j] = row[j];
            }
            return m;
        };
    } else {
        out.jacobian = nullptr;
    }
    out.value_and_jacobian = nullptr;
    return out;
}

void certify_divergence_free(DriftField& b, double t = 0.0) {
    if (!b.divergence_free) return;
    if (!b.periodic) {
        b.divergence_free = false;
        return;
    }
    TorusGrid g(b.dim, 16);
    PeriodicField sample =
        PeriodicField::sample_vector(g, [&](const Vec& x) { return b.value(t, x); });
    if (sample.divergence_rel() > 1e-10)
        throw DomainError("drift '" + b.name + "': divergence-free flag failed certification");
}

} // namespace

// ---- MollifierKernel -------------------------------------------------------

MollifierKernel::MollifierKernel(int dim, int m) : dim_(dim), m_(m) {
    if (dim < 1 || dim > 3) throw DomainError("MollifierKernel: dim must be 1..3");
    if (m < 1) throw DomainError("MollifierKernel: scale must be a positive integer");
    norm_ = profile_norm(dim);
}

double MollifierKernel::density(const Vec& y) const {
    const double s = support();
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) r2 += (y[a] / s) * (y[a] / s);
    if (r2 >= 1.0) return 0.0;
    return norm_ * bump(r2) / std::pow(s, dim_);
}

Vec MollifierKernel::density_gradient(const Vec& y) const {
    const double s = support();
    Vec z = vec_zero();
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
        z[a] = y[a] / s;
        r2 += z[a] * z[a];
    }
    Vec g = vec_zero();
    if (r2 >= 1.0) return g;
    const double f = bump(r2);
    const double d1 = 1.0 - r2;
    const double coeff = -2.0 * f / (d1 * d1) * norm_ / std::pow(s, dim_ + 1);
    for (int a = 0; a < dim_; ++a) g[a] = coeff * z[a];
    return g;
}

double MollifierKernel::fourier(double kmag) const {
    const Marginal& mg = profile_marginal(dim_);
    const double kappa = kmag * support();
    // trapezoid over the tabulated marginal
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < mg.u.size(); ++i) {
        const double du = mg.u[i + 1] - mg.u[i];
        acc += 0.5 * du *
               (mg.g[i] * std::cos(kappa * mg.u[i]) + mg.g[i + 1] * std::cos(kappa * mg.u[i + 1]));
    }
    return acc;
}

double MollifierKernel::mass_quadrature() const {
    const double surf = (dim_ == 1) ? 2.0 : (dim_ == 2 ? 2.0 * M_PI : 4.0 * M_PI);
    const double s = support();
    const double c = norm_ / std::pow(s, dim_);
    return simpson(
               [&](double r) {
                   const double z = r / s;
                   return bump(z * z) * (dim_ == 1 ? 1.0 : (dim_ == 2 ? r : r * r));
               },
               0.0, s, 4000) *
           surf * c;
}

// ---- catalog ---------------------------------------------------------------

DriftField zero_drift(int dim) {
    DriftField b;
    b.dim = dim;
    b.value = [](double, const Vec&) { return vec_zero(); };
    b.jacobian = [](double, const Vec&) { return mat_zero(); };
    b.smooth = true;
    b.divergence_free = true;
    b.periodic = true;
    b.name = "zero";
    certify_divergence_free(b);
    return b;
}

DriftField constant_drift(int dim, const Vec& v) {
    DriftField b;
    b.dim = dim;
    b.value = [v](double, const Vec&) { return v; };
    b.jacobian = [](double, const Vec&) { return mat_zero(); };
    b.smooth = true;
    b.divergence_free = true;
    b.periodic = true;
    b.name = "constant";
    certify_divergence_free(b);
    return b;
}

DriftField linear_drift(int dim, const Mat& a) {
    DriftField b;
    b.dim = dim;
    b.value = [a, dim](double, const Vec& x) { return matvec(a, x, dim); };
    b.jacobian = [a](double, const Vec&) { return a; };
    b.smooth = true;
    b.name = "linear";
    return b;
}

DriftField ou_drift(int dim) {
    DriftField b;
    b.dim = dim;
    b.value = [](double, const Vec& x) { return -1.0 * x; };
    b.jacobian = [dim](double, const Vec&) { return -1.0 * mat_identity(dim); };
    b.smooth = true;
    b.name = "ou";
    return b;
}

DriftField shear_drift(int dim) {
    DriftField b;
    b.dim = dim;
    b.value = [](double, const Vec& x) { return Vec{std::sin(x[1]), 0.0, 0.0}; };
    b.jacobian = [](double, const Vec& x) {
        Mat m = mat_zero();
        m[3 * 0 + 1] = std::cos(x[1]);
        return m;
    };
    b.smooth = true;
    b.divergence_free = true;
    b.periodic = true;
    b.name = "shear";
    certify_divergence_free(b);
    return b;
}

DriftField taylor_green_drift(int dim) {
    DriftField b;
    b.dim = dim;
    if (dim == 2) {
        b.value = [](double, const Vec& x) {
            return Vec{std::cos(x[0]) * std::sin(x[1]), -std::sin(x[0]) * std::cos(x[1]), 0.0};
        };
        b.jacobian = [](double, const Vec& x) {
            Mat m = mat_zero();
            m[0] = -std::sin(x[0]) * std::sin(x[1]);
            m[1] = std::cos(x[0]) * std::cos(x[1]);
            m[3] = -std::cos(x[0]) * std::cos(x[1]);
            m[4] = std::sin(x[0]) * std::sin(x[1]);
            return m;
        };
    } else {
        b.value = [](double, const Vec& x) {
            return Vec{std::sin(x[0]) * std::cos(x[1]) * std::cos(x[2]),
                       -std::cos(x[0]) * std::sin(x[1]) * std::cos(x[2]), 0.0};
        };
        b.jacobian = [](double, const Vec& x) {
            const double sx = std::sin(x[0]), cx = std::cos(x[0]);
            const double sy = std::sin(x[1]), cy = std::cos(x[1]);
            const double sz = std::sin(x[2]), cz = std::cos(x[2]);
            Mat m = mat_zero();
            m[0] = cx * cy * cz;
            m[1] = -sx * sy * cz;
            m[2] = -sx * cy * sz;
            m[3] = sx * sy * cz;
            m[4] = -cx * cy * cz;
            m[5] = cx * sy * sz;
            return m;
        };
    }
    b.smooth = true;
    b.divergence_free = true;
    b.periodic = true;
    b.name = "taylor_green";
    certify_divergence_free(b);
    return b;
}

DriftField ou_well_drift(int dim) {
    DriftField b;
    b.dim = dim;
    Vec c = vec_zero();
    for (int a = 0; a < dim; ++a) c[a] = M_PI;
    TorusGrid wrapper(dim, 2);
    auto cutoff = [](double r, double& chi, double& dchi) {
        if (r <= 1.0) {
            chi = 1.0;
            dchi = 0.0;
        } else if (r >= 2.0) {
            chi = 0.0;
            dchi = 0.0;
        } else {
            const double u = r - 1.0;
            chi = 1.0 - (10.0 * u * u * u - 15.0 * u * u * u * u + 6.0 * u * u * u * u * u);
            dchi = -(30.0 * u * u - 60.0 * u * u * u + 30.0 * u * u * u * u);
        }
    };
    b.value = [c, wrapper, cutoff](double, const Vec& xin) {
        const Vec x = wrapper.wrap(xin);
        const Vec rel = x - c;
        const double r = norm2(rel);
        double chi, dchi;
        cutoff(r, chi, dchi);
        return -chi * rel;
    };
    b.jacobian = [c, dim, wrapper, cutoff](double, const Vec& xin) {
        const Vec x = wrapper.wrap(xin);
        const Vec rel = x - c;
        const double r = norm2(rel);
        double chi, dchi;
        cutoff(r, chi, dchi);
        Mat m = -chi * mat_identity(dim);
        if (r > 0.0 && dchi != 0.0)
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) m[3 * i + j] -= dchi * rel[i] * rel[j] / r;
        return m;
    };
    b.smooth = true;
    b.periodic = true;
    b.name = "ou_well";
    return b;
}

DriftField singular_drift(int dim, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw DomainError("singular_drift: gamma must lie in (0,1)");
    DriftField b;
    b.dim = dim;
    Vec c = vec_zero();
    for (int a = 0; a < dim; ++a) c[a] = M_PI;
    TorusGrid wrapper(dim, 2);
    b.value = [c, gamma, dim, wrapper](double, const Vec& xin) {
        const Vec x = wrapper.wrap(xin);
        Vec rel = x - c;
        const double r = norm2(rel);
        if (r == 0.0 || r >= 2.0) return vec_zero();
        double chi = 1.0;
        if (r > 1.0) {
            const double u = r - 1.0;
            chi = 1.0 - (10.0 * u * u * u - 15.0 * u * u * u * u + 6.0 * u * u * u * u * u);
        }
        (void)dim;
        return (chi / std::pow(r, 1.0 + gamma)) * rel;
    };
    b.smooth = false;
    b.periodic = true;
    b.name = "singular(gamma=" + std::to_string(gamma) + ")";
    return b;
}

DriftField singular_approximation_radial(int dim, double gamma, int m, int table_points) {
    if (dim != 3) throw DomainError("singular_approximation_radial: 3-D only");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("singular_approximation_radial: gamma in (0,1)");
    if (m < 1) throw DomainError("singular_approximation_radial: m >= 1");

    MollifierKernel kernel(dim, m);
    const double s = kernel.support();

    // truncated radial profile h(r) = chi(r) r^{-gamma} 1{ |.| <= m }
    auto profile = [gamma, m](double r) {
        if (r <= 0.0 || r >= 2.0) return 0.0;
        double chi = 1.0;
        if (r > 1.0) {
            const double u = r - 1.0;
            chi = 1.0 - (10.0 * u * u * u - 15.0 * u * u * u * u + 6.0 * u * u * u * u * u);
        }
        const double mag = chi * std::pow(r, -gamma);
        return (mag <= static_cast<double>(m)) ? mag : 0.0;
    };

    // radial component of (h(r) rhat) * rho_m by axisymmetric quadrature:
    // x = r e_z, y in cylindrical (p, zeta)
    std::vector<double> gx, gw;
    gauss_legendre(48, gx, gw);
    auto convolved = [&](double r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double p = 0.5 * s * (gx[i] + 1.0);   // radial in-plane
            const double wp = 0.5 * s * gw[i];
            for (std::size_t j = 0; j < gx.size(); ++j) {
                const double zeta = s * gx[j];
                const double wz = s * gw[j];
                const double rho_arg = std::sqrt(p * p + zeta * zeta);
                Vec yv = {rho_arg, 0.0, 0.0};
                const double rho = kernel.density(yv);
                if (rho == 0.0) continue;
                const double axial = r - zeta;
                const double q = std::sqrt(p * p + axial * axial);
                if (q == 0.0) continue;
                acc += 2.0 * M_PI * p * wp * wz * rho * profile(q) * (axial / q);
            }
        }
        return acc;
    };

    // fine radial table out to the support edge plus the kernel reach
    const double rmax = 2.0 + s + 0.1;
    const int nt = std::max(table_points, 256);
    auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(nt) + 1);
    const double dr = rmax / nt;
    for (int i = 0; i <= nt; ++i) (*table)[static_cast<std::size_t>(i)] = convolved(i * dr);

    Vec c = vec_zero();
    for (int a = 0; a < dim; ++a) c[a] = M_PI;
    TorusGrid wrapper(dim, 2);

    // g(r) by linear interpolation; g'(r) by central differences on the table
    auto g_at = [table, dr, nt](double r) {
        if (r >= nt * dr) return 0.0;
        const double u = r / dr;
        const int i = std::min(static_cast<int>(u), nt - 1);
        const double f = u - i;
        return (1.0 - f) * (*table)[static_cast<std::size_t>(i)] +
               f * (*table)[static_cast<std::size_t>(i) + 1];
    };
    auto gp_at = [table, dr, nt](double r) {
        const double u = r / dr;
        int i = static_cast<int>(u);
        if (i < 1) i = 1;
        if (i > nt - 2) return 0.0;
        const double f = u - i;
        const double d0 = ((*table)[static_cast<std::size_t>(i) + 1] -
                           (*table)[static_cast<std::size_t>(i) - 1]) /
                          (2.0 * dr);
        const double d1 = ((*table)[static_cast<std::size_t>(i) + 2] -
                           (*table)[static_cast<std::size_t>(i)]) /
                          (2.0 * dr);
        return (1.0 - f) * d0 + f * d1;
    };

    DriftField out;
    out.dim = dim;
    out.value = [c, wrapper, g_at, gp_at, dr](double, const Vec& xin) {
        const Vec x = wrapper.wrap(xin);
        const Vec rel = x - c;
        const double r = norm2(rel);
        if (r < dr) return gp_at(dr) * rel;  // odd symmetry: g ~ g'(0) r
        return (g_at(r) / r) * rel;
    };
    out.jacobian = [c, wrapper, g_at, gp_at, dr, dim](double, const Vec& xin) {
        const Vec x = wrapper.wrap(xin);
        const Vec rel = x - c;
        const double r = norm2(rel);
        if (r < dr) return gp_at(dr) * mat_identity(dim);
        const double g = g_at(r);
        const double gp = gp_at(r);
        Mat j = (g / r) * mat_identity(dim);
        const double coef = (gp - g / r) / (r * r);
        for (int i = 0; i < dim; ++i)
            for (int jj = 0; jj < dim; ++jj) j[3 * i + jj] += coef * rel[i] * rel[jj];
        return j;
    };
    out.smooth = true;
    out.periodic = true;
    out.lineage = Lineage::mollified;
    out.level = m;
    out.name = "singular(gamma=" + std::to_string(gamma) + ")~radial_" + std::to_string(m);
    return out;
}

DriftField drift_catalog(const std::string& id, int dim,
                         const std::map<std::string, double>& params) {
    auto get = [&](const std::string& key, double dflt) {
        auto it = params.find(key);
        return it == params.end() ? dflt : it->second;
    };
    if (id == "zero") return zero_drift(dim);
    if (id == "constant")
        return constant_drift(dim, {get("v0", 1.0), get("v1", 0.5), get("v2", -0.25)});
    if (id == "linear") {
        Mat a = mat_zero();
        if (dim == 2) {
            a[1] = 1.0;
            a[3] = -1.0;
        } else {
            a[1] = 1.0;
            a[3] = -1.0;
            a[8] = 0.5;
        }
        return linear_drift(dim, a);
    }
    if (id == "ou") return ou_drift(dim);
    if (id == "ou_well") return ou_well_drift(dim);
    if (id == "shear") return shear_drift(dim);
    if (id == "taylor_green") return taylor_green_drift(dim);
    if (id == "singular") return singular_drift(dim, get("gamma", 0.5));
    throw ConfigError("drift_catalog: unknown drift id '" + id + "'");
}

// ---- operators -------------------------------------------------------------

PeriodicField mollify_grid(const PeriodicField& f, int m) {
    if (m < 1) throw DomainError("mollify_grid: scale must be >= 1");
    MollifierKernel kernel(f.grid().dim, m);
    return stencil_convolve(f, kernel);
}

DriftField mollify(const DriftField& b, int m, int quad_order) {
    if (m < 1) throw DomainError("mollify: scale must be >= 1");
    MollifierKernel kernel(b.dim, m);

    if (b.backing) {
        PeriodicField conv = stencil_convolve(b.backing->values, kernel);
        PeriodicField jac = conv.jacobian();
        DriftField out = grid_backed_field(b.backing->grid, std::move(conv), std::move(jac), true, b);
        out.smooth = true;
        out.lineage = Lineage::mollified;
        out.level = m;
        out.name = b.name + "*rho_" + std::to_string(m);
        return out;
    }

    auto qm = std::make_shared<QuadMollifier>(b, kernel, quad_order);
    DriftField out = b;
    out.value = [qm](double t, const Vec& x) { return qm->value(t, x); };
    out.jacobian = [qm](double t, const Vec& x) {
        Vec v;
        Mat j;
        qm->value_jac(t, x, v, j);
        return j;
    };
    out.value_and_jacobian = [qm](double t, const Vec& x, Vec& v, Mat& j) {
        qm->value_jac(t, x, v, j);
    };
    out.smooth = true;
    out.lineage = Lineage::mollified;
    out.level = m;
    out.backing = nullptr;
    out.name = b.name + "*rho_" + std::to_string(m);
    return out;
}

DriftField truncate(const DriftField& b, double m) {
    if (!(m > 0.0)) throw DomainError("truncate: threshold must be positive");
    DriftField out = b;
    auto base = b.value;
    out.value = [base, m](double t, const Vec& x) {
        const Vec v = base(t, x);
        return (norm2(v) <= m) ? v : vec_zero();
    };
    out.jacobian = nullptr;
    out.value_and_jacobian = nullptr;
    out.smooth = false;
    out.divergence_free = false;
    out.lineage = Lineage::truncated;
    out.level = m;
    out.backing = nullptr;
    out.name = b.name + "|trunc_" + std::to_string(m);
    return out;
}

DriftField gridded(const DriftField& b, const TorusGrid& grid, double t_sample) {
    if (!b.periodic) throw DomainError("gridded: drift must be periodic");
    if (!b.time_constant) throw DomainError("gridded: drift must be time-constant");
    const int d = b.dim;
    PeriodicField values(grid, d);
    PeriodicField jac(grid, d * d);
    const bool has_jac = b.has_jacobian() || static_cast<bool>(b.value_and_jacobian);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.node(i);
        Vec v;
        Mat j = mat_zero();
        if (b.value_and_jacobian) {
            b.value_and_jacobian(t_sample, x, v, j);
        } else {
            v = b.value(t_sample, x);
            if (has_jac) j = b.jacobian(t_sample, x);
        }
        for (int c = 0; c < d; ++c) values.value_mut(i, c) = v[c];
        if (has_jac)
            for (int r = 0; r < d; ++r)
                for (int cjx = 0; cjx < d; ++cjx) jac.value_mut(i, r * d + cjx) = j[3 * r + cjx];
    }
    DriftField out = grid_backed_field(grid, std::move(values), std::move(jac), has_jac, b);
    out.name = b.name + "@grid" + std::to_string(grid.n);
    return out;
}

DriftField scaled(const DriftField& b, double c) {
    DriftField out = b;
    auto bv = b.value;
    out.value = [bv, c](double t, const Vec& x) { return c * bv(t, x); };
    if (b.has_jacobian()) {
        auto bj = b.jacobian;
        out.jacobian = [bj, c](double t, const Vec& x) { return c * bj(t, x); };
    }
    if (b.value_and_jacobian) {
        auto bvj = b.value_and_jacobian;
        out.value_and_jacobian = [bvj, c](double t, const Vec& x, Vec& v, Mat& j) {
            bvj(t, x, v, j);
            v = c * v;
            j = c * j;
        };
    }
    out.backing = nullptr;
    out.name = b.name + "*" + std::to_string(c);
    return out;
}

DriftField approximating_drift(const DriftField& b, int m, int quad_order) {
    if (b.smooth) return mollify(b, m, quad_order);
    return mollify(truncate(b, static_cast<double>(m)), m, quad_order);
}

// ---- remainder functionals ---------------------------------------------------

double remainder_K(const DriftField& b, int m, const TorusGrid& grid,
                   const std::vector<double>& time_samples) {
    if (time_samples.empty()) throw DataError("remainder_K: no time samples");
    MollifierKernel kernel(b.dim, m);
    double sup = 0.0;
    for (double t : time_samples) {
        PeriodicField frame =
            PeriodicField::sample_vector(grid, [&](const Vec& x) { return b.value(t, x); });
        if (frame.has_nan()) throw DataError("remainder_K: NaN sample");
        PeriodicField conv = stencil_convolve(frame, kernel);
        frame -= conv;
        const double nrm = frame.lp_norm(static_cast<double>(b.dim));
        if (!std::isfinite(nrm)) throw DataError("remainder_K: non-integrable sample");
        sup = std::max(sup, nrm);
    }
    return sup;
}

double remainder_K_truncation(const DriftField& b, double m, const MixedNormSpec& spec,
                              const TorusGrid& grid, double t0, double t1, int nt) {
    SpaceTimeField diff;
    for (int i = 0; i <= nt; ++i) {
        const double t = t0 + (t1 - t0) * i / std::max(nt, 1);
        diff.times.push_back(t);
        diff.frames.push_back(PeriodicField::sample_vector(grid, [&](const Vec& x) {
            const Vec v = b.value(t, x);
            return (norm2(v) <= m) ? vec_zero() : v;
        }));
    }
    return mixed_norm(diff, spec, t0, t1);
}

double modulus_omega(const DriftField& b, double delta, const MixedNormSpec& spec,
                     const TorusGrid& grid, double T, int nt_per_window, int n_windows) {
    if (!(delta > 0.0 && delta <= T)) throw DomainError("modulus_omega: need 0 < delta <= T");
    double sup = 0.0;
    const int nw = (T == delta) ? 1 : std::max(n_windows, 1);
    for (int wi = 0; wi < nw; ++wi) {
        const double S = (nw == 1) ? 0.0 : (T - delta) * wi / (nw - 1);
        SpaceTimeField f;
        for (int i = 0; i <= nt_per_window; ++i) {
            const double t = S + delta * i / nt_per_window;
            f.times.push_back(t);
            f.frames.push_back(
                PeriodicField::sample_vector(grid, [&](const Vec& x) { return b.value(t, x); }));
        }
        sup = std::max(sup, mixed_norm(f, spec, S, S + delta));
    }
    return sup;
}

PeriodicField maximal_function(const PeriodicField& f) {
    if (f.components() != 1) throw DomainError("maximal_function: scalar fields only");
    const TorusGrid& g = f.grid();
    const double h = g.spacing();

    // dyadic radii; the first (singleton) radius realizes the r -> 0 limit
    std::vector<double> radii = {0.5 * h};
    for (double r = h; r <= M_PI + 1e-12; r *= 2.0) radii.push_back(r);

    std::vector<std::vector<std::array<int, 3>>> stencils;
    for (double r : radii) {
        std::vector<std::array<int, 3>> st;
        const int reach = static_cast<int>(std::floor(r / h));
        const int d0 = reach, d1 = (g.dim > 1) ? reach : 0, d2 = (g.dim > 2) ? reach : 0;
        for (int i = -d0; i <= d0; ++i)
            for (int j = -d1; j <= d1; ++j)
                for (int k = -d2; k <= d2; ++k) {
                    const double dist = h * std::sqrt(double(i) * i + double(j) * j + double(k) * k);
                    if (dist <= r + 1e-12) st.push_back({i, j, k});
                }
        stencils.push_back(std::move(st));
    }

    PeriodicField out(g, 1);
    const int n = g.n;
    int c3[3];
    for (std::size_t node = 0; node < g.size(); ++node) {
        g.coords(node, c3);
        double best = 0.0;
        for (const auto& st : stencils) {
            double acc = 0.0;
            for (const auto& off : st) {
                int jj[3] = {0, 0, 0};
                for (int a = 0; a < g.dim; ++a) jj[a] = ((c3[a] + off[a]) % n + n) % n;
                acc += std::abs(f.value(g.index(jj[0], jj[1], jj[2]), 0));
            }
            best = std::max(best, acc / static_cast<double>(st.size()));
        }
        out.value_mut(node, 0) = best;
    }
    return out;
}

Vec interp_linear(const PeriodicField& f, const Vec& x, int components, int first) {
    const TorusGrid& g = f.grid();
    const double h = g.spacing();
    const int n = g.n;
    int i0[3] = {0, 0, 0};
    double fr[3] = {0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        double u = x[a] / h;
        double fl = std::floor(u);
        fr[a] = u - fl;
        i0[a] = static_cast<int>(fl) % n;
        if (i0[a] < 0) i0[a] += n;
    }
    Vec out = vec_zero();
    const int corners = 1 << g.dim;
    for (int co = 0; co < corners; ++co) {
        double w = 1.0;
        int jj[3] = {0, 0, 0};
        for (int a = 0; a < g.dim; ++a) {
            const int bit = (co >> a) & 1;
            w *= bit ? fr[a] : (1.0 - fr[a]);
            jj[a] = (i0[a] + bit) % n;
        }
        if (w == 0.0) continue;
        const std::size_t idx = g.index(jj[0], jj[1], jj[2]);
        for (int c = 0; c < components && c < 3; ++c) out[c] += w * f.value(idx, first + c);
    }
    return out;
}

} // namespace sflab::norms
