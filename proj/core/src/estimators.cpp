#include "sflab/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "sflab/errors.hpp"
#include "sflab/flow.hpp"
#include "sflab/parallel.hpp"
#include "sflab/rng.hpp"

namespace sflab::estimators {

using flow::DerivativeRecord;
using flow::FlowConfig;
using flow::FlowEnsemble;

std::vector<Vec> torus_point_grid(int dim, int n) {
    TorusGrid g(dim, n);
    std::vector<Vec> pts(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) pts[i] = g.node(i);
    return pts;
}

// ---- Krylov occupation bound -------------------------------------------------

EstimateReport krylov_check(const std::vector<DriftField>& b_levels, const TestFunction& f,
                            const MixedNormSpec& spec, const KrylovConfig& cfg) {
    if (!(spec.parabolic_order() < 2.0))
        throw DomainError("krylov_check: need d/p + 2/q < 2 strictly");
    if (b_levels.empty()) throw DomainError("krylov_check: no drift levels");

    EstimateReport rep;
    rep.id = "krylov";
    rep.tolerances["spread"] = cfg.spread_tolerance;

    // || f ||_{L^p_q(s,T)} on the norm grid
    TorusGrid ngrid(cfg.dim, cfg.norm_grid);
    SpaceTimeField fst;
    for (int i = 0; i <= cfg.norm_nt; ++i) {
        const double t = cfg.s + (cfg.T - cfg.s) * i / cfg.norm_nt;
        fst.times.push_back(t);
        fst.frames.push_back(PeriodicField::sample_scalar(
            ngrid, [&](const Vec& x) { return f.value(t, x); }));
    }
    const double fnorm = norms::mixed_norm(fst, spec, cfg.s, cfg.T);
    rep.constants["f_norm"] = fnorm;

    const std::vector<Vec> xs = torus_point_grid(cfg.dim, cfg.x_grid);
    const int n_steps = static_cast<int>(std::llround((cfg.T - cfg.s) / cfg.dt));
    const CounterRng rng(cfg.seed, 0);

    std::vector<double> level_C(b_levels.size(), 0.0);
    for (std::size_t li = 0; li < b_levels.size(); ++li) {
        const DriftField& b = b_levels[li];
        std::vector<double> lhs(xs.size(), 0.0);
        parallel_chunks(xs.size(), [&](std::size_t lo, std::size_t hi) {
            double z[4];
            for (std::size_t xi = lo; xi < hi; ++xi) {
                double sum = 0.0;
                for (int path = 0; path < cfg.n_paths; ++path) {
                    Vec x = xs[xi];
                    double acc = 0.0;
                    for (int k = 0; k < n_steps; ++k) {
                        const double tk = cfg.s + k * cfg.dt;
                        acc += f.value(tk, x) * cfg.dt;
                        rng.fill_normals(path, k, cfg.dim, z);
                        const Vec v = b.value(tk, x);
                        const double sq = std::sqrt(cfg.dt);
                        for (int a = 0; a < cfg.dim; ++a) x[a] += v[a] * cfg.dt + sq * z[a];
                    }
                    sum += acc;
                }
                lhs[xi] = sum / cfg.n_paths;
            }
        });
        double sup = 0.0;
        for (double v : lhs) sup = std::max(sup, std::abs(v));

        // path-by-path linearity: the lambda family is an exact rescaling
        std::vector<double> norms_l, values_l;
        for (double lam : cfg.lambdas) {
            norms_l.push_back(lam * fnorm);
            values_l.push_back(lam * sup);
            rep.add_row("scaled_sup", {{"level", static_cast<double>(li)}, {"lambda", lam}},
                        lam * sup);
        }
        const LineFit fit = fit_line(norms_l, values_l);
        level_C[li] = (fnorm > 0.0) ? sup / fnorm : 0.0;
        rep.add_row("constant", {{"level", static_cast<double>(li)}, {"m", b.level}},
                    level_C[li]);
        if (li == 0) {
            rep.exponents["slope"] = fit.slope;
            rep.residuals["slope"] = fit.rms_residual;
        }
    }
    double lo = 1e300, hi = 0.0;
    for (double c : level_C) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    rep.constants["C_max"] = hi;
    rep.constants["spread"] = (lo > 0.0) ? hi / lo : 1.0;
    rep.verdict = (std::isfinite(hi) && rep.constants["spread"] <= cfg.spread_tolerance)
                      ? Verdict::pass
                      : Verdict::fail;
    return rep;
}

// ---- Holder moments ------------------------------------------------------------

EstimateReport holder_moments(const DriftField& b, double r, double beta, HolderAxis axis,
                              const HolderConfig& cfg) {
    EstimateReport rep;
    rep.id = "holder";
    if (cfg.n_scales < 4) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back("fewer than 4 increment scales");
        return rep;
    }

    std::vector<double> increments, moments;
    double se_worst = 0.0;

    if (axis == HolderAxis::time) {
        std::vector<double> cks = {cfg.t};
        for (int j = 0; j < cfg.n_scales; ++j) {
            const double delta = cfg.base_increment * std::pow(2.0, j);
            cks.push_back(cfg.t - delta);
        }
        FlowConfig fc;
        fc.s = cfg.s;
        fc.t = cfg.t;
        fc.dt = cfg.dt;
        fc.n_paths = cfg.n_paths;
        fc.points = {cfg.x0};
        fc.checkpoints = cks;
        fc.seed = cfg.seed;
        FlowEnsemble ens(b, fc);
        const int ref = 0;
        for (int j = 0; j < cfg.n_scales; ++j) {
            const double delta = cfg.base_increment * std::pow(2.0, j);
            double sum = 0.0, sumsq = 0.0;
            for (int path = 0; path < cfg.n_paths; ++path) {
                const Vec d = ens.state(ref, 0, path) - ens.state(1 + j, 0, path);
                const double v = std::pow(norm2(d), r);
                sum += v;
                sumsq += v * v;
            }
            const double mean = sum / cfg.n_paths;
            const double se =
                std::sqrt(std::max(0.0, sumsq / cfg.n_paths - mean * mean) / cfg.n_paths);
            se_worst = std::max(se_worst, mean > 0 ? se / mean : 0.0);
            increments.push_back(delta);
            moments.push_back(mean);
            rep.add_row("moment", {{"increment", delta}}, mean, se);
        }
    } else if (axis == HolderAxis::start) {
        FlowConfig fc;
        fc.s = cfg.s;
        fc.t = cfg.t;
        fc.dt = cfg.dt;
        fc.n_paths = cfg.n_paths;
        fc.points = {cfg.x0};
        fc.seed = cfg.seed;
        FlowEnsemble ref(b, fc);
        for (int j = 0; j < cfg.n_scales; ++j) {
            const double delta = cfg.base_increment * std::pow(2.0, j);
            FlowConfig fcj = fc;
            fcj.s = cfg.s + delta;  // same absolute time origin: shared increments
            FlowEnsemble ej(b, fcj);
            double sum = 0.0;
            for (int path = 0; path < cfg.n_paths; ++path) {
                const Vec d = ref.state(0, 0, path) - ej.state(0, 0, path);
                sum += std::pow(norm2(d), r);
            }
            const double mean = sum / cfg.n_paths;
            increments.push_back(delta);
            moments.push_back(mean);
            rep.add_row("moment", {{"increment", delta}}, mean);
        }
    } else {
        std::vector<Vec> pts = {cfg.x0};
        for (int j = 0; j < cfg.n_scales; ++j) {
            Vec x = cfg.x0;
            x[0] += cfg.base_offset * std::pow(2.0, j);
            pts.push_back(x);
        }
        FlowConfig fc;
        fc.s = cfg.s;
        fc.t = cfg.t;
        fc.dt = cfg.dt;
        fc.n_paths = cfg.n_paths;
        fc.points = pts;
        fc.seed = cfg.seed;
        FlowEnsemble ens(b, fc);
        for (int j = 0; j < cfg.n_scales; ++j) {
            double sum = 0.0;
            for (int path = 0; path < cfg.n_paths; ++path) {
                const Vec d = ens.state(0, 1 + j, path) - ens.state(0, 0, path);
                sum += std::pow(norm2(d), r);
            }
            const double mean = sum / cfg.n_paths;
            increments.push_back(cfg.base_offset * std::pow(2.0, j));
            moments.push_back(mean);
            rep.add_row("moment", {{"increment", increments.back()}}, mean);
        }
    }

    const LineFit fit = fit_loglog(increments, moments);
    rep.exponents["slope"] = fit.slope;
    rep.residuals["slope"] = fit.rms_residual;

    double threshold = 0.0;
    switch (axis) {
        case HolderAxis::time: threshold = beta * r; break;
        case HolderAxis::start: threshold = beta * (r - cfg.dim); break;
        case HolderAxis::space: threshold = r - cfg.dim; break;
    }
    rep.constants["threshold"] = threshold;
    rep.tolerances["slope_frac"] = cfg.slope_tolerance_frac;
    const bool ok = fit.slope >= threshold - cfg.slope_tolerance_frac * std::abs(fit.slope);
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
    return rep;
}

// ---- gradient moments ------------------------------------------------------------

EstimateReport gradient_moment(const std::vector<DriftField>& b_levels, double r, double p,
                               const GradientMomentConfig& cfg) {
    if (b_levels.empty()) throw DomainError("gradient_moment: no drift levels");
    EstimateReport rep;
    rep.id = "gradient_moment";
    rep.tolerances["spread"] = cfg.spread_tolerance;

    std::vector<double> times = cfg.eval_times;
    if (times.empty()) {
        for (int j = 4; j >= 0; --j) {
            const double raw = (cfg.t - cfg.s) / std::pow(2.0, j);
            const long long steps = std::max<long long>(1, std::llround(raw / cfg.dt));
            const double snapped = cfg.s + steps * cfg.dt;
            if (times.empty() || snapped > times.back()) times.push_back(snapped);
        }
    }
    const std::vector<Vec> xs = torus_point_grid(cfg.dim, cfg.x_grid);
    const double cellvol = std::pow(kTwoPi / cfg.x_grid, cfg.dim);

    std::vector<double> level_final(b_levels.size(), 0.0);
    double theta_hat = 0.0, theta_resid = 0.0;
    bool theta_needed = false, theta_ok = true;

    for (std::size_t li = 0; li < b_levels.size(); ++li) {
        FlowConfig fc;
        fc.s = cfg.s;
        fc.t = cfg.t;
        fc.dt = cfg.dt;
        fc.n_paths = cfg.n_paths;
        fc.points = xs;
        fc.checkpoints = times;
        fc.seed = cfg.seed;
        FlowEnsemble ens(b_levels[li], fc);
        DerivativeRecord rec = flow::variational_flow(ens, b_levels[li]);

        std::vector<double> qt;
        const Mat eye = mat_identity(cfg.dim);
        for (std::size_t ck = 0; ck < times.size(); ++ck) {
            double xint = 0.0;
            for (std::size_t pt = 0; pt < xs.size(); ++pt) {
                double macc = 0.0;
                for (int path = 0; path < cfg.n_paths; ++path) {
                    const Mat d = rec.at(static_cast<int>(ck), static_cast<int>(pt), path) - eye;
                    macc += std::pow(frobenius(d), r);
                }
                xint += cellvol * std::pow(macc / cfg.n_paths, p);
            }
            const double q = std::pow(xint, 1.0 / (p * r));
            qt.push_back(q);
            rep.add_row("quantity",
                        {{"level", static_cast<double>(li)},
                         {"m", b_levels[li].level},
                         {"t", times[ck] - cfg.s}},
                        q);
        }
        level_final[li] = qt.back();

        const bool all_zero = std::all_of(qt.begin(), qt.end(), [](double v) { return v == 0.0; });
        if (all_zero) {
            rep.notes.push_back("level " + std::to_string(li) + ": quantity identically zero");
        } else {
            theta_needed = true;
            std::vector<double> ts;
            for (double t : times) ts.push_back(t - cfg.s);
            const LineFit fit = fit_loglog(ts, qt);
            if (li == 0 || fit.slope < theta_hat) {
                theta_hat = fit.slope;
                theta_resid = fit.rms_residual;
            }
            if (!(fit.slope > 0.0)) theta_ok = false;
        }
    }
    if (theta_needed) {
        rep.exponents["theta_hat"] = theta_hat;
        rep.residuals["theta_hat"] = theta_resid;
    }

    double lo = 1e300, hi = 0.0;
    for (double v : level_final) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    rep.constants["final_max"] = hi;
    rep.constants["spread"] = (lo > 0.0) ? hi / lo : 1.0;
    const bool spread_ok =
        (b_levels.size() < 2) || rep.constants["spread"] <= cfg.spread_tolerance;
    rep.verdict = (spread_ok && (!theta_needed || theta_ok)) ? Verdict::pass : Verdict::fail;
    return rep;
}

// ---- Malliavin compactness statistics ------------------------------------------------

EstimateReport malliavin_stats(const std::vector<DriftField>& b_levels, double beta,
                               const MalliavinConfig& cfg) {
    if (b_levels.empty()) throw DomainError("malliavin_stats: no drift levels");
    EstimateReport rep;
    rep.id = "malliavin_stats";
    rep.tolerances["spread"] = cfg.spread_tolerance;

    if (cfg.n_sigmas < 4) {
        rep.verdict = Verdict::inconclusive;
        rep.notes.push_back("sigma grid too coarse for the Holder quotient");
        return rep;
    }

    std::vector<double> sigmas(cfg.n_sigmas);
    for (int i = 0; i < cfg.n_sigmas; ++i) {
        const double raw = cfg.s + (cfg.t - cfg.s) * i / (cfg.n_sigmas - 1);
        sigmas[i] = cfg.s + std::llround((raw - cfg.s) / cfg.dt) * cfg.dt;  // grid-aligned
    }
    std::vector<double> w(cfg.n_sigmas, 0.0);  // trapezoid weights on [s, t]
    for (int i = 0; i + 1 < cfg.n_sigmas; ++i) {
        const double dsig = sigmas[i + 1] - sigmas[i];
        w[i] += 0.5 * dsig;
        w[i + 1] += 0.5 * dsig;
    }

    TorusGrid xg(cfg.dim, cfg.x_grid);
    const std::vector<Vec> xs = torus_point_grid(cfg.dim, cfg.x_grid);
    const double cellvol = xg.cell_volume();
    const double h = xg.spacing();

    std::vector<double> a1(b_levels.size()), a2(b_levels.size()), a3(b_levels.size());
    std::vector<double> a1_coarse(b_levels.size());

    for (std::size_t li = 0; li < b_levels.size(); ++li) {
        FlowConfig fc;
        fc.s = cfg.s;
        fc.t = cfg.t;
        fc.dt = cfg.dt;
        fc.n_paths = cfg.n_paths;
        fc.points = xs;
        fc.seed = cfg.seed;
        FlowEnsemble ens(b_levels[li], fc);
        DerivativeRecord rec = flow::malliavin_derivative(ens, b_levels[li], sigmas);

        // A1: common-noise central differences across the point grid
        double acc1 = 0.0, acc1c = 0.0;
        int c3[3];
        for (std::size_t pt = 0; pt < xs.size(); ++pt) {
            xg.coords(pt, c3);
            double e_x2 = 0.0, e_g2 = 0.0, e_g2c = 0.0;
            for (int path = 0; path < cfg.n_paths; ++path) {
                const Vec x = ens.state(0, static_cast<int>(pt), path);
                e_x2 += dot(x, x);
                for (int a = 0; a < cfg.dim; ++a) {
                    for (int off = 1; off <= 2; ++off) {
                        int jp[3] = {c3[0], c3[1], c3[2]};
                        int jm[3] = {c3[0], c3[1], c3[2]};
                        jp[a] = (c3[a] + off) % xg.n;
                        jm[a] = (c3[a] - off + xg.n) % xg.n;
                        const Vec diff =
                            ens.state(0, static_cast<int>(xg.index(jp[0], jp[1], jp[2])), path) -
                            ens.state(0, static_cast<int>(xg.index(jm[0], jm[1], jm[2])), path);
                        const double scale = 2.0 * off * h;
                        const double g2 = dot(diff, diff) / (scale * scale);
                        if (off == 1)
                            e_g2 += g2;
                        else
                            e_g2c += g2;
                    }
                }
            }
            acc1 += cellvol * (e_x2 + e_g2) / cfg.n_paths;
            acc1c += cellvol * (e_x2 + e_g2c) / cfg.n_paths;
        }
        a1[li] = acc1;
        a1_coarse[li] = acc1c;

        // A2 and A3 from the sigma records at the final checkpoint
        double acc2 = 0.0, acc3 = 0.0;
        for (std::size_t pt = 0; pt < xs.size(); ++pt) {
            double e2 = 0.0, e3 = 0.0;
            for (int path = 0; path < cfg.n_paths; ++path) {
                for (int i = 0; i < cfg.n_sigmas; ++i) {
                    const Mat& Di = rec.at(0, static_cast<int>(pt), path, i);
                    e2 += w[i] * frobenius(Di) * frobenius(Di);
                }
                for (int i = 0; i < cfg.n_sigmas; ++i)
                    for (int j = 0; j < cfg.n_sigmas; ++j) {
                        if (i == j) continue;
                        const double ds = std::abs(sigmas[i] - sigmas[j]);
                        const Mat diff = rec.at(0, static_cast<int>(pt), path, i) -
                                         rec.at(0, static_cast<int>(pt), path, j);
                        const double num = frobenius(diff);
                        e3 += w[i] * w[j] * num * num / std::pow(ds, 1.0 + 2.0 * beta);
                    }
            }
            acc2 += cellvol * e2 / cfg.n_paths;
            acc3 += cellvol * e3 / cfg.n_paths;
        }
        a2[li] = acc2;
        a3[li] = acc3;

        rep.add_row("A1", {{"level", static_cast<double>(li)}, {"m", b_levels[li].level}}, a1[li]);
        rep.add_row("A2", {{"level", static_cast<double>(li)}, {"m", b_levels[li].level}}, a2[li]);
        rep.add_row("A3", {{"level", static_cast<double>(li)}, {"m", b_levels[li].level}}, a3[li]);
    }

    rep.constants["A1_fd_consistency"] =
        (a1.back() > 0.0) ? a1_coarse.back() / a1.back() : 1.0;

    auto bounded = [&](const std::vector<double>& v) {
        const double fin = v.back();
        if (fin == 0.0) return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
        const double mx = *std::max_element(v.begin(), v.end());
        return mx <= cfg.spread_tolerance * fin;
    };
    const bool ok = bounded(a1) && bounded(a2) && bounded(a3);
    rep.constants["A1_max"] = *std::max_element(a1.begin(), a1.end());
    rep.constants["A2_max"] = *std::max_element(a2.begin(), a2.end());
    rep.constants["A3_max"] = *std::max_element(a3.begin(), a3.end());
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
    return rep;
}

// ---- Cauchy convergence of the approximating sequence ----------------------------------

EstimateReport cauchy_convergence(const std::vector<DriftField>& b_levels,
                                  const CauchyConfig& cfg) {
    if (b_levels.size() < 2) throw DomainError("cauchy_convergence: need at least two levels");
    for (const auto& b : b_levels)
        if (b.dim != cfg.dim) throw DomainError("cauchy_convergence: mismatched dimensions");

    EstimateReport rep;
    rep.id = "cauchy";

    TorusGrid xg(cfg.dim, cfg.x_grid);
    const std::vector<Vec> xs = torus_point_grid(cfg.dim, cfg.x_grid);
    const double cellvol = xg.cell_volume();

    std::vector<FlowEnsemble> ensembles;
    ensembles.reserve(b_levels.size());
    for (const auto& b : b_levels) {
        FlowConfig fc;
        fc.s = cfg.s;
        fc.t = cfg.t;
        fc.dt = cfg.dt;
        fc.n_paths = cfg.n_paths;
        fc.points = xs;
        fc.seed = cfg.seed;
        ensembles.emplace_back(b, fc);
    }

    std::vector<double> dist, dist_se;
    for (std::size_t li = 0; li + 1 < ensembles.size(); ++li) {
        double sum = 0.0, sumsq = 0.0;
        for (int path = 0; path < cfg.n_paths; ++path) {
            double per_path = 0.0;
            for (std::size_t pt = 0; pt < xs.size(); ++pt) {
                const Vec d = ensembles[li].state(0, static_cast<int>(pt), path) -
                              ensembles[li + 1].state(0, static_cast<int>(pt), path);
                per_path += cellvol * dot(d, d);
            }
            sum += per_path;
            sumsq += per_path * per_path;
        }
        const double mean = sum / cfg.n_paths;
        const double se =
            std::sqrt(std::max(0.0, sumsq / cfg.n_paths - mean * mean) / cfg.n_paths);
        dist.push_back(mean);
        dist_se.push_back(se);
        rep.add_row("distance",
                    {{"pair", static_cast<double>(li)},
                     {"m_low", b_levels[li].level},
                     {"m_high", b_levels[li + 1].level}},
                    mean, se);
    }

    int violations = 0;
    for (std::size_t i = 0; i + 1 < dist.size(); ++i) {
        if (dist[i + 1] > dist[i] + 3.0 * (dist_se[i] + dist_se[i + 1])) ++violations;
    }
    rep.constants["violations"] = violations;
    rep.verdict = (violations <= 1) ? Verdict::pass : Verdict::fail;
    return rep;
}

} // namespace sflab::estimators
