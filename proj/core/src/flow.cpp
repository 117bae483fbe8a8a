#include "sflab/flow.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

#include "sflab/errors.hpp"
#include "sflab/parallel.hpp"

namespace sflab::flow {

namespace {

int steps_between(double s, double t, double dt, const char* what) {
    if (!(dt > 0.0)) throw DomainError(std::string(what) + ": dt must be positive");
    if (!(t >= s)) throw DomainError(std::string(what) + ": need t >= s");
    const double raw = (t - s) / dt;
    const long long n = std::llround(raw);
    if (std::abs(raw - static_cast<double>(n)) > 1e-6)
        throw DomainError(std::string(what) + ": dt must divide t - s");
    return static_cast<int>(n);
}

int aligned_index(double time, double s, double dt, const char* what) {
    const double raw = (time - s) / dt;
    const long long k = std::llround(raw);
    if (std::abs(time - (s + static_cast<double>(k) * dt)) > 1e-9 * std::max(1.0, std::abs(time)))
        throw DomainError(std::string(what) + ": time not aligned with the step grid");
    return static_cast<int>(k);
}

[[noreturn]] void throw_nan(double t, const Vec& x) {
    std::ostringstream os;
    os << "drift evaluated to NaN at t=" << t << ", x=(" << x[0] << "," << x[1] << "," << x[2]
       << ")";
    throw DataError(os.str());
}

} // namespace

FlowEnsemble::FlowEnsemble(DriftField b, FlowConfig cfg)
    : FlowEnsemble(std::move(b), std::move(cfg), {}) {}

FlowEnsemble::FlowEnsemble(DriftField b, FlowConfig cfg, std::vector<Vec> initial_states)
    : drift_(std::move(b)), cfg_(std::move(cfg)) {
    if (cfg_.points.empty()) throw DomainError("FlowEnsemble: empty point set");
    if (cfg_.n_paths < 1) throw DomainError("FlowEnsemble: need at least one path");
    n_steps_ = steps_between(cfg_.s, cfg_.t, cfg_.dt, "FlowEnsemble");
    step_offset_ = std::llround((cfg_.s - cfg_.time_origin) / cfg_.dt);
    if (cfg_.checkpoints.empty()) cfg_.checkpoints = {cfg_.t};
    for (double c : cfg_.checkpoints) {
        const int k = aligned_index(c, cfg_.s, cfg_.dt, "checkpoint");
        if (k < 0 || k > n_steps_) throw DomainError("checkpoint outside [s, t]");
    }

    const std::size_t npt = cfg_.points.size();
    const std::size_t npath = static_cast<std::size_t>(cfg_.n_paths);
    if (initial_states.empty()) {
        init_.resize(npt * npath);
        for (std::size_t p = 0; p < npt; ++p)
            for (std::size_t m = 0; m < npath; ++m) init_[p * npath + m] = cfg_.points[p];
    } else {
        if (initial_states.size() != npt * npath)
            throw DomainError("FlowEnsemble: initial state tensor has wrong shape");
        init_ = std::move(initial_states);
    }
    states_.assign(cfg_.checkpoints.size() * npt * npath, vec_zero());
    integrate();
    compute_noise_mean();
}

void FlowEnsemble::integrate() {
    const int d = drift_.dim;
    const std::size_t npt = cfg_.points.size();
    const std::size_t npath = static_cast<std::size_t>(cfg_.n_paths);
    const double dt = cfg_.dt;
    const double sq = std::sqrt(dt);

    std::vector<int> ck_step(cfg_.checkpoints.size());
    for (std::size_t c = 0; c < cfg_.checkpoints.size(); ++c)
        ck_step[c] = aligned_index(cfg_.checkpoints[c], cfg_.s, dt, "checkpoint");

    std::atomic<long> escapes{0};
    auto body = [&](std::size_t lo, std::size_t hi) {
        long local_escapes = 0;
        double z[4];
        for (std::size_t w = lo; w < hi; ++w) {
            const int pt = static_cast<int>(w / npath);
            const int path = static_cast<int>(w % npath);
            const CounterRng rng = rng_for_point(pt);
            const std::int64_t nid = noise_path_id(path);
            const double sign = noise_sign(path);
            Vec x = init_[w];
            bool escaped = false;
            for (std::size_t c = 0; c < ck_step.size(); ++c)
                if (ck_step[c] == 0) states_[c * npt * npath + w] = x;
            for (int k = 0; k < n_steps_; ++k) {
                const double tk = cfg_.s + k * dt;
                rng.fill_normals(nid, step_offset_ + k, d, z);
                const Vec v = drift_.value(tk, x);
                if (std::isnan(v[0]) || std::isnan(v[1]) || std::isnan(v[2])) throw_nan(tk, x);
                for (int a = 0; a < d; ++a) x[a] += v[a] * dt + sq * sign * z[a];
                if (cfg_.escape_bound > 0.0 && !escaped) {
                    for (int a = 0; a < d; ++a)
                        if (std::abs(x[a]) > cfg_.escape_bound) escaped = true;
                    if (escaped) ++local_escapes;
                }
                for (std::size_t c = 0; c < ck_step.size(); ++c)
                    if (ck_step[c] == k + 1) states_[c * npt * npath + w] = x;
            }
        }
        escapes += local_escapes;
    };
    parallel_chunks(npt * npath, body);
    escape_count_ = escapes.load();
}

void FlowEnsemble::compute_noise_mean() {
    const int d = drift_.dim;
    const CounterRng rng = rng_for_point(0);
    double acc[3] = {0, 0, 0};
    double z[4];
    const long long total = static_cast<long long>(cfg_.n_paths) * std::max(n_steps_, 1);
    for (int path = 0; path < cfg_.n_paths; ++path) {
        const std::int64_t nid = noise_path_id(path);
        const double sign = noise_sign(path);
        for (int k = 0; k < n_steps_; ++k) {
            rng.fill_normals(nid, step_offset_ + k, d, z);
            for (int a = 0; a < d; ++a) acc[a] += sign * z[a];
        }
    }
    for (int a = 0; a < 3; ++a) noise_mean_[a] = (total > 0) ? acc[a] / total : 0.0;
}

bool FlowEnsemble::noise_mean_ok() const {
    const double gate =
        4.0 / std::sqrt(static_cast<double>(cfg_.n_paths) * std::max(n_steps_, 1));
    for (int a = 0; a < drift_.dim; ++a)
        if (std::abs(noise_mean_[a]) > gate) return false;
    return true;
}

Vec FlowEnsemble::brownian_increment(int pt, int path, int k) const {
    const CounterRng rng = rng_for_point(pt);
    double z[4];
    rng.fill_normals(noise_path_id(path), step_offset_ + k, drift_.dim, z);
    const double sq = std::sqrt(cfg_.dt) * noise_sign(path);
    Vec out = vec_zero();
    for (int a = 0; a < drift_.dim; ++a) out[a] = sq * z[a];
    return out;
}

int FlowEnsemble::checkpoint_index(double time, double tol) const {
    for (std::size_t c = 0; c < cfg_.checkpoints.size(); ++c)
        if (std::abs(cfg_.checkpoints[c] - time) <= tol) return static_cast<int>(c);
    throw DomainError("no checkpoint stored at requested time");
}

FlowEnsemble simulate_flow(const DriftField& b, const FlowConfig& cfg) {
    return FlowEnsemble(b, cfg);
}

FlowEnsemble restart_flow(const FlowEnsemble& ens, double r, double t_new,
                          std::vector<double> checkpoints) {
    const int ck = ens.checkpoint_index(r);
    FlowConfig cfg = ens.config();
    cfg.s = r;
    cfg.t = t_new;
    cfg.checkpoints = checkpoints.empty() ? std::vector<double>{t_new} : std::move(checkpoints);
    std::vector<Vec> init(static_cast<std::size_t>(ens.n_points()) * ens.n_paths());
    for (int pt = 0; pt < ens.n_points(); ++pt)
        for (int m = 0; m < ens.n_paths(); ++m)
            init[static_cast<std::size_t>(pt) * ens.n_paths() + m] = ens.state(ck, pt, m);
    return FlowEnsemble(ens.drift(), std::move(cfg), std::move(init));
}

namespace {

// Re-integrates each stored path (identical to the forward pass bit for bit)
// while the visitor advances whatever derivative state it carries.
// visit(w, k, t_k, gradb_k) runs before each step; arrive(w, k1, t_{k1})
// runs after landing on t_{k1} (and once at k1 = 0 for the start point).
template <class Visit, class Arrive>
void replay(const FlowEnsemble& ens, const DriftField& b, Visit&& visit, Arrive&& arrive) {
    if (!b.has_jacobian() && !b.value_and_jacobian)
        throw CapabilityError("flow derivative pass: drift has no gradient map");
    const FlowConfig& cfg = ens.config();
    const int d = b.dim;
    const std::size_t npt = cfg.points.size();
    const std::size_t npath = static_cast<std::size_t>(cfg.n_paths);
    const double dt = cfg.dt;
    const double sq = std::sqrt(dt);

    auto body = [&](std::size_t lo, std::size_t hi) {
        double z[4];
        for (std::size_t w = lo; w < hi; ++w) {
            const int pt = static_cast<int>(w / npath);
            const int path = static_cast<int>(w % npath);
            const CounterRng rng = ens.rng_for_point(pt);
            const std::int64_t nid = ens.noise_path_id(path);
            const double sign = ens.noise_sign(path);
            Vec x = ens.initial_state(pt, path);
            arrive(w, 0, cfg.s);
            for (int k = 0; k < ens.n_steps(); ++k) {
                const double tk = cfg.s + k * dt;
                rng.fill_normals(nid, ens.absolute_step(k), d, z);
                Vec v;
                Mat g;
                if (b.value_and_jacobian)
                    b.value_and_jacobian(tk, x, v, g);
                else {
                    v = b.value(tk, x);
                    g = b.jacobian(tk, x);
                }
                if (std::isnan(v[0]) || std::isnan(v[1]) || std::isnan(v[2])) throw_nan(tk, x);
                visit(w, k, tk, g);
                for (int a = 0; a < d; ++a) x[a] += v[a] * dt + sq * sign * z[a];
                arrive(w, k + 1, tk + dt);
            }
        }
    };
    parallel_chunks(npt * npath, body);
}

std::vector<int> checkpoint_steps(const FlowEnsemble& ens) {
    const FlowConfig& cfg = ens.config();
    std::vector<int> out(cfg.checkpoints.size());
    for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c)
        out[c] = aligned_index(cfg.checkpoints[c], cfg.s, cfg.dt, "checkpoint");
    return out;
}

} // namespace

DerivativeRecord variational_flow(const FlowEnsemble& ens, const DriftField& b) {
    const int d = ens.dim();
    const std::size_t nwork = static_cast<std::size_t>(ens.n_points()) * ens.n_paths();
    const std::vector<int> cks = checkpoint_steps(ens);

    DerivativeRecord rec;
    rec.kind = DerivativeRecord::Kind::spatial;
    rec.dim = d;
    rec.n_checkpoints = ens.n_checkpoints();
    rec.n_points = ens.n_points();
    rec.n_paths = ens.n_paths();
    rec.mats.assign(cks.size() * nwork, mat_zero());

    std::vector<Mat> J(nwork, mat_identity(d));
    replay(
        ens, b,
        [&](std::size_t w, int, double, const Mat& g) {
            J[w] += ens.config().dt * matmul(g, J[w], d);
        },
        [&](std::size_t w, int k1, double) {
            for (std::size_t c = 0; c < cks.size(); ++c)
                if (cks[c] == k1) rec.mats[c * nwork + w] = J[w];
        });
    return rec;
}

std::vector<DerivativeRecord> chaos_series_gradient(const FlowEnsemble& ens, const DriftField& b,
                                                    int n_max) {
    if (n_max < 0 || n_max > 6)
        throw DomainError("chaos_series_gradient: n_max must lie in 0..6");
    if (n_max > ens.n_steps())
        throw DomainError("chaos_series_gradient: n_max exceeds the path grid resolution");
    const int d = ens.dim();
    const std::size_t nwork = static_cast<std::size_t>(ens.n_points()) * ens.n_paths();
    const std::vector<int> cks = checkpoint_steps(ens);

    std::vector<DerivativeRecord> sums(static_cast<std::size_t>(n_max) + 1);
    for (auto& rec : sums) {
        rec.kind = DerivativeRecord::Kind::spatial;
        rec.dim = d;
        rec.n_checkpoints = ens.n_checkpoints();
        rec.n_points = ens.n_points();
        rec.n_paths = ens.n_paths();
        rec.mats.assign(cks.size() * nwork, mat_zero());
    }

    // terms[w][j] = time-ordered integral of order j along path w
    std::vector<Mat> terms(nwork * (static_cast<std::size_t>(n_max) + 1));
    for (std::size_t w = 0; w < nwork; ++w) {
        terms[w * (n_max + 1)] = mat_identity(d);
        for (int j = 1; j <= n_max; ++j) terms[w * (n_max + 1) + j] = mat_zero();
    }
    const double dt = ens.config().dt;
    replay(
        ens, b,
        [&](std::size_t w, int, double, const Mat& g) {
            Mat* t = &terms[w * (n_max + 1)];
            for (int j = n_max; j >= 1; --j) t[j] += dt * matmul(g, t[j - 1], d);
        },
        [&](std::size_t w, int k1, double) {
            for (std::size_t c = 0; c < cks.size(); ++c) {
                if (cks[c] != k1) continue;
                Mat acc = mat_zero();
                const Mat* t = &terms[w * (n_max + 1)];
                for (int n = 0; n <= n_max; ++n) {
                    acc += t[n];
                    sums[static_cast<std::size_t>(n)].mats[c * nwork + w] = acc;
                }
            }
        });
    return sums;
}

DerivativeRecord malliavin_derivative(const FlowEnsemble& ens, const DriftField& b,
                                      const std::vector<double>& sigmas) {
    const FlowConfig& cfg = ens.config();
    const int d = ens.dim();
    const int ns = static_cast<int>(sigmas.size());
    if (ns == 0) throw DomainError("malliavin_derivative: empty sigma grid");
    std::vector<int> sigma_step(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        sigma_step[i] = aligned_index(sigmas[i], cfg.s, cfg.dt, "sigma");
        if (sigma_step[i] < 0 || sigma_step[i] > ens.n_steps())
            throw DomainError("malliavin_derivative: sigma outside [s, t]");
    }
    const std::size_t nwork = static_cast<std::size_t>(ens.n_points()) * ens.n_paths();
    const std::vector<int> cks = checkpoint_steps(ens);

    DerivativeRecord rec;
    rec.kind = DerivativeRecord::Kind::malliavin;
    rec.dim = d;
    rec.n_checkpoints = ens.n_checkpoints();
    rec.n_points = ens.n_points();
    rec.n_paths = ens.n_paths();
    rec.n_sigmas = ns;
    rec.sigmas = sigmas;
    rec.mats.assign(cks.size() * nwork * ns, mat_zero());

    // D state per (work, sigma); zero before activation at sigma
    std::vector<Mat> D(nwork * ns, mat_zero());
    std::vector<char> active(nwork * ns, 0);
    const double dt = cfg.dt;

    auto activate = [&](std::size_t w, int k1) {
        for (int i = 0; i < ns; ++i) {
            if (sigma_step[i] == k1) {
                D[w * ns + i] = mat_identity(d);
                active[w * ns + i] = 1;
            }
        }
    };
    replay(
        ens, b,
        [&](std::size_t w, int, double, const Mat& g) {
            for (int i = 0; i < ns; ++i)
                if (active[w * ns + i]) D[w * ns + i] += dt * matmul(g, D[w * ns + i], d);
        },
        [&](std::size_t w, int k1, double) {
            activate(w, k1);
            for (std::size_t c = 0; c < cks.size(); ++c) {
                if (cks[c] != k1) continue;
                for (int i = 0; i < ns; ++i)
                    rec.mats[(c * nwork + w) * ns + i] = D[w * ns + i];
            }
        });
    return rec;
}

} // namespace sflab::flow
