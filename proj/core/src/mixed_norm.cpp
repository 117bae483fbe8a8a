#include "sflab/mixed_norm.hpp"

#include <cmath>

#include "sflab/errors.hpp"

namespace sflab::norms {

MixedNormSpec::MixedNormSpec(int dim_, double p_, double q_, double s_)
    : dim(dim_), p(p_), q(q_), s(s_) {
    if (dim < 2) throw DomainError("MixedNormSpec: dimension must be >= 2");
    if (std::isnan(p) || std::isnan(q)) throw DomainError("MixedNormSpec: NaN exponent");
    if (!(p > 1.0) || !(q > 1.0))
        throw DomainError("MixedNormSpec: exponents must lie in (1, inf]");
}

Criticality classify(const MixedNormSpec& spec, double tol) {
    const double kappa = spec.lps_index();
    if (kappa > tol) return Criticality::above_critical;
    if (kappa < -tol) return Criticality::below_critical;
    return Criticality::critical;
}

std::string criticality_label(Criticality c) {
    switch (c) {
        case Criticality::above_critical: return "above-critical";
        case Criticality::critical: return "critical";
        case Criticality::below_critical: return "below-critical";
    }
    return "?";
}

LpsIndex lps_index(const MixedNormSpec& spec) {
    const double kappa = spec.lps_index();
    if (!std::isfinite(kappa)) throw DomainError("lps_index: non-finite criticality index");
    return {kappa, classify(spec)};
}

double spatial_norm(const PeriodicField& frame, double p) {
    if (frame.has_nan()) throw DataError("spatial_norm: NaN sample in field");
    return frame.lp_norm(p);
}

double mixed_norm(const SpaceTimeField& field, const MixedNormSpec& spec,
                  double t0, double t1) {
    if (spec.s != 0.0)
        throw DomainError("mixed_norm: s must be 0 (use fractional_sobolev_norm)");
    if (!(t1 > t0)) throw DataError("mixed_norm: empty time window");

    std::vector<double> ts;
    std::vector<double> g; // spatial norms per retained sample
    for (std::size_t i = 0; i < field.times.size(); ++i) {
        const double t = field.times[i];
        if (t < t0 - 1e-12 || t > t1 + 1e-12) continue;
        ts.push_back(t);
        g.push_back(spatial_norm(field.frames[i], spec.p));
    }
    if (ts.empty()) throw DataError("mixed_norm: no samples inside the window");

    if (std::isinf(spec.q)) {
        double m = 0.0;
        for (double v : g) m = std::max(m, v);
        return m;
    }
    if (ts.size() == 1) {
        // single sample: treat the field as constant on the window
        return g[0] * std::pow(t1 - t0, 1.0 / spec.q);
    }
    // trapezoid in time on g^q
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const double dt = ts[i + 1] - ts[i];
        acc += 0.5 * dt * (std::pow(g[i], spec.q) + std::pow(g[i + 1], spec.q));
    }
    return std::pow(acc, 1.0 / spec.q);
}

} // namespace sflab::norms
