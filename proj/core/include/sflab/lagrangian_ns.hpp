#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sflab/periodic_field.hpp"
#include "sflab/report.hpp"

namespace sflab::ns {

struct NSRunConfig {
    int dim = 2;
    int grid_n = 32;
    double T = 0.5;
    double dt = 1e-3;
    int paths_per_node = 2000;
    int time_grid_intervals = 8;  // stored velocity frames on [-T, 0]
    double sub_interval = 0.0;    // 0 -> T/8; must divide T, multiple of the frame step
    int picard_cap = 6;
    double tolerance = 0.025;     // relative L2 update threshold
    double se_bound = 0.10;       // relative MC standard error gate
    std::uint64_t seed = 1;
    int upsample = 2;             // spectral refinement factor for interpolation
    bool antithetic = true;
    int w_band = 4;               // field band for the w-equation residual
                                  // (the residual is read on w_band - 2)

    double frame_step() const { return T / time_grid_intervals; }
    double sub_length() const { return sub_interval > 0.0 ? sub_interval : T / 8.0; }
};

/// Divergence-free velocity on the backward window [-T, 0] plus the fixed
/// initial datum and the Picard iteration record.
struct VelocityState {
    double T = 0.5;
    TorusGrid grid;
    std::vector<double> times;          // ascending, -T .. 0
    std::vector<PeriodicField> frames;  // one d-component field per time
    PeriodicField phi;                  // projected initial datum (t = 0)
    int iterations = 0;                 // largest per-subinterval Picard count
    std::vector<double> residual_history;
    std::vector<int> residual_sub;      // sub-interval index per history entry
    bool inconclusive = false;
    bool accuracy_warning = false;

    int frame_index(double t, double tol = 1e-9) const;
    const PeriodicField& at_time(double t) const { return frames[frame_index(t)]; }
    double max_speed() const;
    double max_divergence_rel() const;
};

/// Per-mode projection onto divergence-free fields; the zero mode passes
/// through unchanged.
PeriodicField leray_project(const PeriodicField& f);

struct RepresentationResult {
    PeriodicField field;  // projected Monte Carlo mean
    PeriodicField raw;    // unprojected mean (the w field)
    double se_l2 = 0.0;   // L2-aggregated standard error of the mean
    bool inconclusive = false;
};

/// u(t, .) = P E[ grad^T X_{t,0} phi(X_{t,0}) ] by Monte Carlo over paths
/// started at every grid node, with the variational equation driven by the
/// spectrally differentiated stored velocity.
RepresentationResult representation_step(const VelocityState& u, double t,
                                         const PeriodicField& phi, const NSRunConfig& cfg);

/// Fixed-point iteration of the backward stochastic system, marching backward
/// over sub-intervals and reusing the converged tail.
VelocityState picard_solve(const PeriodicField& phi, const NSRunConfig& cfg);

/// Pseudo-spectral reference: 2/3-rule dealiasing, exact diffusion factor in
/// reversed time, projected nonlinearity, integrating-factor RK2.
VelocityState reference_spectral_ns(const PeriodicField& phi, double T, const TorusGrid& grid,
                                    double dt, int time_grid_intervals = 8);

/// PDE residual of the vector equation satisfied by
/// w(t) = E[grad^T X_{t,0} phi(X_{t,0})] on the converged state.
EstimateReport w_equation_residual(const VelocityState& u, const PeriodicField& phi,
                                   const NSRunConfig& cfg, double tolerance = 5e-2,
                                   std::vector<double> eval_times = {});

/// || E f(X_{t,0}^.) ||_q <= ||f||_q within the Monte Carlo margin.
EstimateReport lp_persistence_check(const VelocityState& u,
                                    const std::function<double(const Vec&)>& f, double q,
                                    const NSRunConfig& cfg, std::vector<double> eval_times = {});

// spectral diagnostics used by the reference-solver checks
double l2_norm_sq(const PeriodicField& u);
double grad_norm_sq(const PeriodicField& u);

// stock initial data
PeriodicField taylor_green_phi(const TorusGrid& grid);          // 2-D vortex
PeriodicField single_mode_phi(const TorusGrid& grid);           // (sin y, 0[, 0])
PeriodicField gradient_phi(const TorusGrid& grid);              // grad of a scalar bump

} // namespace sflab::ns
