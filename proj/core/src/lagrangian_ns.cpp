#include "sflab/lagrangian_ns.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <utility>

#include "sflab/errors.hpp"
#include "sflab/parallel.hpp"
#include "sflab/rng.hpp"
#include "sflab/spectral.hpp"

namespace sflab::ns {

namespace {

using Cplx = std::complex<double>;

long long steps_exact(double span, double dt, const char* what) {
    const long long n = std::llround(span / dt);
    if (std::abs(n * dt - span) > 1e-9) throw DomainError(std::string(what) + ": step misaligned");
    return n;
}

// Fine-grid samples of every stored frame (velocity and its Jacobian) plus
// the initial datum, ready for cheap multilinear interpolation along paths.
// Slots are interleaved per node (u0..u_{d-1}, g00..g_{dd}) so one corner
// gather touches a single contiguous block.
struct VelocitySampler {
    int dim = 2;
    int nf = 0;             // fine nodes per axis
    double h_inv = 0.0;     // fine 1/h
    double tmin = 0.0, frame_step = 0.0;
    int n_frames = 0;
    int stride = 0;         // d + d*d slots per node
    double max_speed = 0.0;
    std::vector<std::vector<double>> data;  // [frame][node*stride + slot]
    std::vector<double> phi;                // [node*dim + c]
    std::size_t nn = 0;

    VelocitySampler(const VelocityState& state, const PeriodicField& phi_field, int factor) {
        dim = state.grid.dim;
        nf = state.grid.n * factor;
        nn = 1;
        for (int a = 0; a < dim; ++a) nn *= static_cast<std::size_t>(nf);
        h_inv = nf / kTwoPi;
        tmin = state.times.front();
        frame_step = state.times.size() > 1 ? state.times[1] - state.times[0] : 1.0;
        n_frames = static_cast<int>(state.times.size());
        stride = dim + dim * dim;
        data.resize(n_frames);
        for (int j = 0; j < n_frames; ++j) {
            PeriodicField uf = state.frames[j].upsampled(factor);
            PeriodicField gf = state.frames[j].jacobian().upsampled(factor);
            auto& slab = data[static_cast<std::size_t>(j)];
            slab.resize(nn * static_cast<std::size_t>(stride));
            for (std::size_t node = 0; node < nn; ++node) {
                double* dst = slab.data() + node * stride;
                for (int c = 0; c < dim; ++c) dst[c] = uf.value(node, c);
                for (int c = 0; c < dim * dim; ++c) dst[dim + c] = gf.value(node, c);
            }
            max_speed = std::max(max_speed, state.frames[j].linf());
        }
        PeriodicField pf = phi_field.upsampled(factor);
        phi.resize(nn * static_cast<std::size_t>(dim));
        for (std::size_t node = 0; node < nn; ++node)
            for (int c = 0; c < dim; ++c) phi[node * dim + c] = pf.value(node, c);
    }

    struct Corners {
        std::size_t idx[8];  // node index (unscaled)
        double w[8];
        int count;
    };

    template <int DIM>
    void corners(const Vec& x, Corners& c) const {
        int i0[3] = {0, 0, 0};
        double fr[3] = {0, 0, 0};
        for (int a = 0; a < DIM; ++a) {
            double uu = x[a] * h_inv;
            double fl = std::floor(uu);
            fr[a] = uu - fl;
            long long ii = static_cast<long long>(fl) % nf;
            if (ii < 0) ii += nf;
            i0[a] = static_cast<int>(ii);
        }
        c.count = 1 << DIM;
        for (int co = 0; co < (1 << DIM); ++co) {
            double w = 1.0;
            std::size_t flat = 0;
            for (int a = 0; a < DIM; ++a) {
                const int bit = (co >> a) & 1;
                w *= bit ? fr[a] : (1.0 - fr[a]);
                int j = i0[a] + bit;
                if (j >= nf) j -= nf;
                flat = flat * nf + static_cast<std::size_t>(j);
            }
            c.idx[co] = flat;
            c.w[co] = w;
        }
    }

    // bracketing frames and blend weight for time tau
    void locate(double tau, int& j0, double& w) const {
        double rel = (tau - tmin) / frame_step;
        int j = static_cast<int>(std::floor(rel));
        if (j < 0) j = 0;
        if (j > n_frames - 2) j = n_frames - 2;
        j0 = j;
        w = rel - j;
        if (w < 0.0) w = 0.0;
        if (w > 1.0) w = 1.0;
    }

    // time-blended interpolation of all slots in one pass
    template <int DIM>
    void fused(double tau, const Corners& c, double* slots) const {
        constexpr int kStride = DIM + DIM * DIM;
        int j0;
        double w;
        locate(tau, j0, w);
        const double* f0 = data[static_cast<std::size_t>(j0)].data();
        const double* f1 = data[static_cast<std::size_t>(j0) + 1].data();
        for (int s = 0; s < kStride; ++s) slots[s] = 0.0;
        for (int i = 0; i < (1 << DIM); ++i) {
            const double w0 = c.w[i] * (1.0 - w);
            const double w1 = c.w[i] * w;
            const double* b0 = f0 + c.idx[i] * kStride;
            const double* b1 = f1 + c.idx[i] * kStride;
            for (int s = 0; s < kStride; ++s) slots[s] += w0 * b0[s] + w1 * b1[s];
        }
    }

    template <int DIM>
    void velocity_only(double tau, const Corners& c, Vec& out) const {
        constexpr int kStride = DIM + DIM * DIM;
        int j0;
        double w;
        locate(tau, j0, w);
        const double* f0 = data[static_cast<std::size_t>(j0)].data();
        const double* f1 = data[static_cast<std::size_t>(j0) + 1].data();
        for (int a = 0; a < DIM; ++a) out[a] = 0.0;
        for (int i = 0; i < (1 << DIM); ++i) {
            const double w0 = c.w[i] * (1.0 - w);
            const double w1 = c.w[i] * w;
            const double* b0 = f0 + c.idx[i] * kStride;
            const double* b1 = f1 + c.idx[i] * kStride;
            for (int a = 0; a < DIM; ++a) out[a] += w0 * b0[a] + w1 * b1[a];
        }
    }

    template <int DIM>
    void phi_at(const Corners& c, Vec& out) const {
        for (int a = 0; a < DIM; ++a) out[a] = 0.0;
        for (int i = 0; i < (1 << DIM); ++i) {
            const double* b = phi.data() + c.idx[i] * DIM;
            for (int a = 0; a < DIM; ++a) out[a] += c.w[i] * b[a];
        }
    }

    void phi_at_runtime(const Corners& c, Vec& out) const {
        if (dim == 2)
            phi_at<2>(c, out);
        else
            phi_at<3>(c, out);
    }
};

// Monte Carlo sweep over all grid nodes for one start time t; accumulates
// E[grad^T X phi(X)] (with_jacobian) or E[f(X)] (scalar payload).
struct NodeMoments {
    std::vector<double> mean;    // comp-major on the coarse grid
    std::vector<double> var;     // per comp per node, variance of pair means
    double se_l2 = 0.0;
};

template <int DIM, bool WithJ, class FinalMap>
NodeMoments path_sweep_impl(const VelocitySampler& smp, const TorusGrid& coarse, double t,
                            const NSRunConfig& cfg, int out_comps, FinalMap&& final_map) {
    constexpr int d = DIM;
    const double dt = cfg.dt;
    const long long n_steps = steps_exact(0.0 - t, dt, "representation_step");
    const long long k0 = std::llround((t + cfg.T) / dt);
    const double sq = std::sqrt(dt);
    const double cfl_limit = coarse.spacing() / dt;
    if (smp.max_speed > cfl_limit)
        throw CflError("representation sweep: |u| dt exceeds the grid spacing",
                       0.5 * coarse.spacing() / std::max(smp.max_speed, 1e-300));

    const std::size_t n_nodes = coarse.size();
    const int m = cfg.paths_per_node;
    const bool anti = cfg.antithetic;

    NodeMoments out;
    out.mean.assign(static_cast<std::size_t>(out_comps) * n_nodes, 0.0);
    out.var.assign(static_cast<std::size_t>(out_comps) * n_nodes, 0.0);

    parallel_chunks(n_nodes, [&](std::size_t lo, std::size_t hi) {
        double z[4];
        VelocitySampler::Corners c{};
        std::vector<double> pair_acc(static_cast<std::size_t>(out_comps));
        std::vector<double> sum(static_cast<std::size_t>(out_comps));
        std::vector<double> sumsq(static_cast<std::size_t>(out_comps));
        std::vector<double> y(static_cast<std::size_t>(out_comps));
        for (std::size_t node = lo; node < hi; ++node) {
            const CounterRng rng(cfg.seed, 1 + node);
            const Vec x0 = coarse.node(node);
            std::fill(sum.begin(), sum.end(), 0.0);
            std::fill(sumsq.begin(), sumsq.end(), 0.0);
            const int samples = anti ? m / 2 : m;
            double slots[12];
            for (int path = 0; path < m; ++path) {
                const std::int64_t nid = anti ? (path >> 1) : path;
                const double sign = (anti && (path & 1)) ? -1.0 : 1.0;
                Vec x = x0;
                Mat J = mat_identity(d);
                for (long long k = 0; k < n_steps; ++k) {
                    const double tau = t + static_cast<double>(k) * dt;
                    smp.corners<DIM>(x, c);
                    Vec v;
                    if constexpr (WithJ) {
                        smp.fused<DIM>(tau, c, slots);
                        for (int a = 0; a < d; ++a) v[a] = slots[a];
                        // J += dt * grad(u) J with grad packed after u
                        Mat jn;
                        for (int i = 0; i < d; ++i)
                            for (int jj = 0; jj < d; ++jj) {
                                double acc = 0.0;
                                for (int kk = 0; kk < d; ++kk)
                                    acc += slots[d + i * d + kk] * J[3 * kk + jj];
                                jn[3 * i + jj] = acc;
                            }
                        for (int i = 0; i < d; ++i)
                            for (int jj = 0; jj < d; ++jj) J[3 * i + jj] += dt * jn[3 * i + jj];
                    } else {
                        smp.velocity_only<DIM>(tau, c, v);
                    }
                    rng.fill_normals(nid, k0 + k, d, z);
                    for (int a = 0; a < d; ++a) x[a] += v[a] * dt + sq * sign * z[a];
                }
                smp.corners<DIM>(x, c);
                final_map(c, J, y.data());
                if (anti) {
                    if ((path & 1) == 0) {
                        for (int q = 0; q < out_comps; ++q) pair_acc[q] = y[q];
                    } else {
                        for (int q = 0; q < out_comps; ++q) {
                            const double s2 = 0.5 * (pair_acc[q] + y[q]);
                            sum[q] += s2;
                            sumsq[q] += s2 * s2;
                        }
                    }
                } else {
                    for (int q = 0; q < out_comps; ++q) {
                        sum[q] += y[q];
                        sumsq[q] += y[q] * y[q];
                    }
                }
            }
            for (int q = 0; q < out_comps; ++q) {
                const double mean = sum[q] / samples;
                const double var = std::max(0.0, sumsq[q] / samples - mean * mean);
                out.mean[static_cast<std::size_t>(q) * n_nodes + node] = mean;
                out.var[static_cast<std::size_t>(q) * n_nodes + node] = var / samples;
            }
        }
    });

    double acc = 0.0;
    for (double v : out.var) acc += v;
    out.se_l2 = std::sqrt(acc * coarse.cell_volume());
    return out;
}

template <bool WithJ, class FinalMap>
NodeMoments path_sweep(const VelocitySampler& smp, const TorusGrid& coarse, double t,
                       const NSRunConfig& cfg, int out_comps, FinalMap&& final_map) {
    if (smp.dim == 2)
        return path_sweep_impl<2, WithJ>(smp, coarse, t, cfg, out_comps,
                                         std::forward<FinalMap>(final_map));
    return path_sweep_impl<3, WithJ>(smp, coarse, t, cfg, out_comps,
                                     std::forward<FinalMap>(final_map));
}

PeriodicField moments_to_field(const NodeMoments& mm, const TorusGrid& g, int comps) {
    PeriodicField f(g, comps);
    const std::size_t nn = g.size();
    for (int c = 0; c < comps; ++c)
        for (std::size_t i = 0; i < nn; ++i)
            f.value_mut(i, c) = mm.mean[static_cast<std::size_t>(c) * nn + i];
    return f;
}

RepresentationResult representation_at(const VelocitySampler& smp, const TorusGrid& grid,
                                       double t, const NSRunConfig& cfg) {
    const int d = grid.dim;
    NodeMoments mm = path_sweep<true>(
        smp, grid, t, cfg, d, [&](const VelocitySampler::Corners& c, const Mat& J, double* y) {
            Vec ph;
            smp.phi_at_runtime(c, ph);
            for (int i = 0; i < d; ++i) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc += J[3 * j + i] * ph[j];  // grad^T X
                y[i] = acc;
            }
        });
    RepresentationResult res;
    res.raw = moments_to_field(mm, grid, d);
    res.field = res.raw.leray_projected();
    res.se_l2 = mm.se_l2;
    return res;
}

} // namespace

// ---- VelocityState ---------------------------------------------------------

int VelocityState::frame_index(double t, double tol) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - t) <= tol) return static_cast<int>(i);
    throw DomainError("VelocityState: no frame at requested time");
}

double VelocityState::max_speed() const {
    double m = 0.0;
    for (const auto& f : frames) m = std::max(m, f.linf());
    return m;
}

double VelocityState::max_divergence_rel() const {
    double m = 0.0;
    for (const auto& f : frames) m = std::max(m, f.divergence_rel());
    return m;
}

PeriodicField leray_project(const PeriodicField& f) { return f.leray_projected(); }

// ---- representation step -----------------------------------------------------

RepresentationResult representation_step(const VelocityState& u, double t,
                                         const PeriodicField& phi, const NSRunConfig& cfg) {
    if (t > 0.0 || t < -u.T - 1e-12)
        throw DomainError("representation_step: t outside [-T, 0]");
    if (t == 0.0) {
        RepresentationResult res;
        res.raw = phi;
        res.field = phi.leray_projected();
        return res;
    }
    VelocitySampler smp(u, phi, cfg.upsample);
    RepresentationResult res = representation_at(smp, u.grid, t, cfg);
    const double scale = std::max(phi.lp_norm(2.0), 1e-300);
    res.inconclusive = (res.se_l2 / scale) > cfg.se_bound;
    return res;
}

// ---- Picard iteration ----------------------------------------------------------

VelocityState picard_solve(const PeriodicField& phi_in, const NSRunConfig& cfg) {
    if (cfg.dim != 2 && cfg.dim != 3) throw DomainError("picard_solve: dim must be 2 or 3");
    TorusGrid grid(cfg.dim, cfg.grid_n);
    if (!(phi_in.grid() == grid)) throw DomainError("picard_solve: phi grid mismatch");

    const double dt_u = cfg.frame_step();
    const double L = cfg.sub_length();
    const long long n_frames = steps_exact(cfg.T, dt_u, "picard_solve frame grid");
    const long long frames_per_sub = std::llround(L / dt_u);
    if (frames_per_sub < 1 || std::abs(frames_per_sub * dt_u - L) > 1e-9)
        throw DomainError("picard_solve: sub-interval must be a multiple of the frame step");
    const long long n_subs = steps_exact(cfg.T, L, "picard_solve sub-intervals");
    steps_exact(dt_u, cfg.dt, "picard_solve: dt must divide the frame step");

    PeriodicField phi = phi_in.leray_projected();
    const double phi_scale = std::max(phi.lp_norm(2.0), 1e-300);

    VelocityState state;
    state.T = cfg.T;
    state.grid = grid;
    state.phi = phi;
    for (long long j = 0; j <= n_frames; ++j) {
        state.times.push_back(-cfg.T + static_cast<double>(j) * dt_u);
        state.frames.push_back(phi);
    }
    state.frames.back() = phi;  // t = 0 is the fixed datum

    int worst_iters = 0;
    for (long long sub = 0; sub < n_subs; ++sub) {
        // frame indices strictly inside [-(sub+1)L, -subL)
        std::vector<int> targets;
        for (long long j = 0; j <= n_frames; ++j) {
            const double t = state.times[static_cast<std::size_t>(j)];
            if (t >= -(static_cast<double>(sub) + 1) * L - 1e-12 &&
                t < -static_cast<double>(sub) * L - 1e-12)
                targets.push_back(static_cast<int>(j));
        }
        if (targets.empty()) continue;

        // seed the sub-interval from the converged frame at its right edge
        const PeriodicField& seed = state.frames[static_cast<std::size_t>(targets.back()) + 1];
        for (int j : targets) state.frames[static_cast<std::size_t>(j)] = seed;

        int iters = 0;
        double resid = 1e300;
        while (iters < cfg.picard_cap) {
            VelocitySampler smp(state, phi, cfg.upsample);
            std::vector<PeriodicField> fresh;
            double sweep_se = 0.0;
            bool se_flag = false;
            for (int j : targets) {
                RepresentationResult rr =
                    representation_at(smp, grid, state.times[static_cast<std::size_t>(j)], cfg);
                sweep_se = std::max(sweep_se, rr.se_l2);
                se_flag = se_flag || ((rr.se_l2 / phi_scale) > cfg.se_bound);
                fresh.push_back(std::move(rr.field));
            }
            resid = 0.0;
            for (std::size_t ti = 0; ti < targets.size(); ++ti) {
                PeriodicField diff = fresh[ti];
                diff -= state.frames[static_cast<std::size_t>(targets[ti])];
                resid = std::max(resid, diff.lp_norm(2.0) / phi_scale);
                state.frames[static_cast<std::size_t>(targets[ti])] = std::move(fresh[ti]);
            }
            state.residual_history.push_back(resid);
            state.residual_sub.push_back(static_cast<int>(sub));
            if (se_flag) state.accuracy_warning = true;
            ++iters;
            if (resid <= cfg.tolerance) break;
        }
        worst_iters = std::max(worst_iters, iters);
        if (resid > cfg.tolerance) state.inconclusive = true;
    }
    state.iterations = worst_iters;
    return state;
}

// ---- pseudo-spectral reference solver -----------------------------------------------

namespace {

struct NSWorkspace {
    TorusGrid grid;
    int d;
    std::size_t nn;
    std::vector<double> k2;
    std::vector<std::array<int, 3>> kvec;
    std::vector<char> dealias_keep;

    explicit NSWorkspace(const TorusGrid& g) : grid(g), d(g.dim), nn(g.size()) {
        k2.resize(nn);
        kvec.resize(nn);
        dealias_keep.resize(nn);
        const int cut = g.n / 3;
        int idx[3];
        for (std::size_t i = 0; i < nn; ++i) {
            g.coords(i, idx);
            double acc = 0.0;
            bool keep = true;
            std::array<int, 3> kk = {0, 0, 0};
            for (int a = 0; a < d; ++a) {
                kk[a] = g.wavenumber(idx[a]);
                acc += static_cast<double>(kk[a]) * kk[a];
                if (std::abs(kk[a]) > cut) keep = false;
            }
            kvec[i] = kk;
            k2[i] = acc;
            dealias_keep[i] = keep ? 1 : 0;
        }
    }

    // N_hat = P dealias FFT[(u . grad) u], zero mode pinned to 0
    void nonlinear(const std::vector<std::vector<Cplx>>& uhat,
                   std::vector<std::vector<Cplx>>& nhat, std::vector<Cplx>& scratch,
                   std::vector<std::vector<double>>& unod,
                   std::vector<std::vector<double>>& dunod) const {
        const int nyq = grid.n / 2;
        const bool even = (grid.n % 2 == 0);
        unod.resize(static_cast<std::size_t>(d));
        dunod.resize(static_cast<std::size_t>(d) * d);
        for (int a = 0; a < d; ++a) {
            scratch = uhat[static_cast<std::size_t>(a)];
            spectral::inverse(grid.dim, grid.n, scratch.data());
            unod[static_cast<std::size_t>(a)].resize(nn);
            for (std::size_t i = 0; i < nn; ++i)
                unod[static_cast<std::size_t>(a)][i] = scratch[i].real();
        }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                scratch = uhat[static_cast<std::size_t>(i)];
                for (std::size_t q = 0; q < nn; ++q) {
                    const int ka = kvec[q][j];
                    if (even && ka == -nyq)
                        scratch[q] = Cplx(0, 0);
                    else
                        scratch[q] *= Cplx(0.0, static_cast<double>(ka));
                }
                spectral::inverse(grid.dim, grid.n, scratch.data());
                auto& slot = dunod[static_cast<std::size_t>(i) * d + j];
                slot.resize(nn);
                for (std::size_t q = 0; q < nn; ++q) slot[q] = scratch[q].real();
            }
        nhat.resize(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) {
            scratch.resize(nn);
            for (std::size_t q = 0; q < nn; ++q) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j)
                    acc += unod[static_cast<std::size_t>(j)][q] *
                           dunod[static_cast<std::size_t>(i) * d + j][q];
                scratch[q] = acc;
            }
            spectral::forward(grid.dim, grid.n, scratch.data());
            nhat[static_cast<std::size_t>(i)] = scratch;
        }
        // dealias, project, pin the mean mode
        for (std::size_t q = 0; q < nn; ++q) {
            if (!dealias_keep[q] || k2[q] == 0.0) {
                for (int a = 0; a < d; ++a) nhat[static_cast<std::size_t>(a)][q] = Cplx(0, 0);
                continue;
            }
            Cplx kdot(0, 0);
            for (int a = 0; a < d; ++a)
                kdot += static_cast<double>(kvec[q][a]) * nhat[static_cast<std::size_t>(a)][q];
            for (int a = 0; a < d; ++a)
                nhat[static_cast<std::size_t>(a)][q] -= (kvec[q][a] / k2[q]) * kdot;
        }
    }
};

} // namespace

VelocityState reference_spectral_ns(const PeriodicField& phi_in, double T, const TorusGrid& grid,
                                    double dt, int time_grid_intervals) {
    if (grid.dim != 2 && grid.dim != 3)
        throw DomainError("reference_spectral_ns: dim must be 2 or 3");
    const long long n_steps = steps_exact(T, dt, "reference_spectral_ns");
    const double dt_u = T / time_grid_intervals;
    const long long stride = steps_exact(dt_u, dt, "reference_spectral_ns frame stride");

    PeriodicField phi = phi_in.leray_projected();
    const int d = grid.dim;
    NSWorkspace ws(grid);

    std::vector<std::vector<Cplx>> uhat(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) uhat[static_cast<std::size_t>(a)] = phi.spectrum(a);

    std::vector<double> efac(ws.nn);
    for (std::size_t q = 0; q < ws.nn; ++q) efac[q] = std::exp(-0.5 * ws.k2[q] * dt);

    VelocityState state;
    state.T = T;
    state.grid = grid;
    state.phi = phi;

    auto snapshot = [&](double t_phys) {
        std::vector<std::vector<Cplx>> spectra(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) spectra[static_cast<std::size_t>(a)] = uhat[static_cast<std::size_t>(a)];
        state.times.push_back(t_phys);
        state.frames.push_back(PeriodicField::from_spectrum(grid, d, spectra));
    };

    snapshot(0.0);
    std::vector<std::vector<Cplx>> n0, n1;
    std::vector<Cplx> scratch;
    std::vector<std::vector<double>> unod, dunod;
    std::vector<std::vector<Cplx>> stage(static_cast<std::size_t>(d));

    for (long long k = 0; k < n_steps; ++k) {
        ws.nonlinear(uhat, n0, scratch, unod, dunod);
        for (int a = 0; a < d; ++a) {
            auto& s = stage[static_cast<std::size_t>(a)];
            s = uhat[static_cast<std::size_t>(a)];
            for (std::size_t q = 0; q < ws.nn; ++q)
                s[q] = efac[q] * (s[q] + dt * n0[static_cast<std::size_t>(a)][q]);
        }
        ws.nonlinear(stage, n1, scratch, unod, dunod);
        for (int a = 0; a < d; ++a) {
            auto& uh = uhat[static_cast<std::size_t>(a)];
            for (std::size_t q = 0; q < ws.nn; ++q)
                uh[q] = efac[q] * uh[q] +
                        0.5 * dt * (efac[q] * n0[static_cast<std::size_t>(a)][q] +
                                    n1[static_cast<std::size_t>(a)][q]);
        }
        if ((k + 1) % stride == 0) snapshot(-static_cast<double>(k + 1) * dt);
    }
    std::reverse(state.times.begin(), state.times.end());
    std::reverse(state.frames.begin(), state.frames.end());
    state.accuracy_warning = state.frames.front().tail_fraction() > 0.10;
    return state;
}

// ---- w-equation residual --------------------------------------------------------------

EstimateReport w_equation_residual(const VelocityState& u, const PeriodicField& phi,
                                   const NSRunConfig& cfg, double tolerance,
                                   std::vector<double> eval_times) {
    EstimateReport rep;
    rep.id = "w_residual";
    rep.tolerances["relative_residual"] = tolerance;

    const int nt = static_cast<int>(u.times.size());
    if (eval_times.empty()) {
        for (int frac = 1; frac <= 3; ++frac) {
            const int j = (nt - 1) * frac / 4;
            if (j >= 1 && j + 1 < nt) eval_times.push_back(u.times[static_cast<std::size_t>(j)]);
        }
    }
    std::set<int> needed;
    for (double t : eval_times) {
        const int j = u.frame_index(t);
        if (j < 1 || j + 1 >= nt)
            throw DomainError("w_equation_residual: eval time needs both neighbors");
        needed.insert(j - 1);
        needed.insert(j);
        needed.insert(j + 1);
    }

    VelocitySampler smp(u, phi, cfg.upsample);
    std::map<int, PeriodicField> w;
    for (int j : needed) {
        const double t = u.times[static_cast<std::size_t>(j)];
        if (t == 0.0) {
            w.emplace(j, phi);
        } else {
            RepresentationResult rr = representation_at(smp, u.grid, t, cfg);
            w.emplace(j, std::move(rr.raw));
        }
    }

    // Two bands are in play. Fields are cut at `band` to keep the
    // |k|^2-amplified Monte Carlo noise off the Laplacian; the residual is
    // then read on `band - 2`, where every product of retained modes is
    // fully represented (a product of |k| <= band factors reaches into
    // |k| <= band - 2 only through pairs that are both retained).
    const int band = cfg.w_band;
    const int report_band = std::max(1, band - 2);
    const int d = u.grid.dim;
    bool ok = true;
    double worst = 0.0;
    for (double t : eval_times) {
        const int j = u.frame_index(t);
        const double dt_u = u.times[static_cast<std::size_t>(j) + 1] -
                            u.times[static_cast<std::size_t>(j) - 1];
        const PeriodicField wj = w.at(j).band_filtered(band);
        const PeriodicField uj = u.frames[static_cast<std::size_t>(j)].band_filtered(band);
        PeriodicField dw = w.at(j + 1).band_filtered(band);
        dw -= w.at(j - 1).band_filtered(band);
        dw *= 1.0 / dt_u;

        PeriodicField lap = wj.laplacian();
        PeriodicField jw = wj.jacobian();   // d_j w^i
        PeriodicField ju = uj.jacobian();   // d_j u^i
        PeriodicField resid(u.grid, d);
        for (std::size_t node = 0; node < u.grid.size(); ++node) {
            for (int i = 0; i < d; ++i) {
                double conv = 0.0, stretch = 0.0;
                for (int a = 0; a < d; ++a) {
                    conv += jw.value(node, i * d + a) * uj.value(node, a);
                    stretch += ju.value(node, a * d + i) * wj.value(node, a);
                }
                resid.value_mut(node, i) =
                    dw.value(node, i) + 0.5 * lap.value(node, i) + conv + stretch;
            }
        }
        PeriodicField resid_low = resid.band_filtered(report_band);
        const PeriodicField w_low = wj.band_filtered(report_band);
        const double rel = resid_low.lp_norm(2.0) / std::max(w_low.lp_norm(2.0), 1e-300);
        worst = std::max(worst, rel);
        rep.add_row("relative_residual", {{"t", t}}, rel);
        if (rel > tolerance) ok = false;
    }
    rep.constants["worst_residual"] = worst;
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
    return rep;
}

// ---- L^p persistence --------------------------------------------------------------------

EstimateReport lp_persistence_check(const VelocityState& u,
                                    const std::function<double(const Vec&)>& f, double q,
                                    const NSRunConfig& cfg, std::vector<double> eval_times) {
    EstimateReport rep;
    rep.id = "lp_persistence";
    if (eval_times.empty()) eval_times = {u.times.front(), u.times[u.times.size() / 2]};

    PeriodicField fsample = PeriodicField::sample_scalar(u.grid, f);
    const double fnorm = fsample.lp_norm(q);
    rep.constants["f_norm"] = fnorm;

    // fine-grid samples of f for evaluation at path endpoints
    PeriodicField ffine = fsample.upsampled(cfg.upsample);
    VelocitySampler smp(u, u.phi, cfg.upsample);
    std::vector<double> fgrid(ffine.nodes());
    std::copy_n(ffine.component_data(0), ffine.nodes(), fgrid.begin());

    bool ok = true;
    for (double t : eval_times) {
        double lhs, margin;
        if (t == 0.0) {
            lhs = fnorm;
            margin = 0.0;
        } else {
            NodeMoments mm = path_sweep<false>(
                smp, u.grid, t, cfg, 1,
                [&](const VelocitySampler::Corners& c, const Mat&, double* y) {
                    const double* base = fgrid.data();
                    double acc = 0.0;
                    for (int i = 0; i < c.count; ++i) acc += c.w[i] * base[c.idx[i]];
                    y[0] = acc;
                });
            PeriodicField mean = moments_to_field(mm, u.grid, 1);
            lhs = mean.lp_norm(q);
            margin = 3.0 * mm.se_l2 / std::max(fsample.lp_norm(2.0), 1e-300);
        }
        rep.add_row("lhs", {{"t", t}}, lhs);
        rep.add_row("bound", {{"t", t}}, fnorm * (1.0 + margin));
        if (lhs > fnorm * (1.0 + margin) + 1e-12) ok = false;
    }
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
    return rep;
}

// ---- diagnostics and stock data ---------------------------------------------------------

double l2_norm_sq(const PeriodicField& u) {
    const double n = u.lp_norm(2.0);
    return n * n;
}

double grad_norm_sq(const PeriodicField& u) {
    double acc = 0.0;
    for (int c = 0; c < u.components(); ++c) {
        PeriodicField comp = u.component(c);
        for (int a = 0; a < u.grid().dim; ++a) {
            const double g = comp.derivative(a).lp_norm(2.0);
            acc += g * g;
        }
    }
    return acc;
}

PeriodicField taylor_green_phi(const TorusGrid& grid) {
    if (grid.dim != 2) throw DomainError("taylor_green_phi: 2-D initial datum");
    return PeriodicField::sample_vector(grid, [](const Vec& x) {
        return Vec{std::cos(x[0]) * std::sin(x[1]), -std::sin(x[0]) * std::cos(x[1]), 0.0};
    });
}

PeriodicField single_mode_phi(const TorusGrid& grid) {
    return PeriodicField::sample_vector(grid, [](const Vec& x) {
        return Vec{std::sin(x[1]), 0.0, 0.0};
    });
}

PeriodicField gradient_phi(const TorusGrid& grid) {
    // grad of cos(x) cos(y): annihilated by the projection
    return PeriodicField::sample_vector(grid, [](const Vec& x) {
        return Vec{-std::sin(x[0]) * std::cos(x[1]), -std::cos(x[0]) * std::sin(x[1]), 0.0};
    });
}

} // namespace sflab::ns
