#pragma once

#include <limits>
#include <string>

#include "sflab/periodic_field.hpp"

namespace sflab::norms {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Exponent triple (s, p, q) for the space L^q_t H^{s,p}_x, with the
/// convention 1/inf = 0.
struct MixedNormSpec {
    int dim = 3;
    double p = 2.0;   // spatial exponent, in (1, inf]
    double q = 2.0;   // temporal exponent, in (1, inf]
    double s = 0.0;   // derivative order

    MixedNormSpec() = default;
    MixedNormSpec(int dim_, double p_, double q_, double s_ = 0.0);

    /// Criticality index kappa = 1 - d/p - 2/q.
    double lps_index() const { return 1.0 - dim / p - 2.0 / q; }
    double parabolic_order() const { return dim / p + 2.0 / q; }
};

enum class Criticality { above_critical, critical, below_critical };

Criticality classify(const MixedNormSpec& spec, double tol = 1e-12);
std::string criticality_label(Criticality c);

/// kappa together with its classification.
struct LpsIndex {
    double kappa;
    Criticality label;
};
LpsIndex lps_index(const MixedNormSpec& spec);

/// Composite space-time quadrature of the L^q_t L^p_x norm over [t0, t1].
/// q = inf takes the max over time samples, p = inf over space samples.
double mixed_norm(const SpaceTimeField& field, const MixedNormSpec& spec,
                  double t0, double t1);

/// Single-frame helper for fields constant in time: c |T|^{1/q} scaling is
/// the caller's business, this returns just the spatial factor.
double spatial_norm(const PeriodicField& frame, double p);

} // namespace sflab::norms
