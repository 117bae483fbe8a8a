#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sflab/drift.hpp"
#include "sflab/linalg.hpp"
#include "sflab/rng.hpp"

namespace sflab::flow {

using norms::DriftField;

struct FlowConfig {
    double s = 0.0;
    double t = 1.0;
    double dt = 1e-3;
    int n_paths = 1000;
    std::vector<Vec> points;
    std::vector<double> checkpoints;  // grid-aligned; defaults to {t}
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    bool per_point_noise = false;  // distinct noise bundle per initial point
    bool antithetic = false;       // odd paths negate the increments of even ones
    double escape_bound = 0.0;     // > 0 activates the escape diagnostic
    double time_origin = 0.0;      // anchor of the absolute step counter
};

/// Monte Carlo ensemble of two-parameter flow paths X_{s,t}^x under a common
/// Brownian stream. Increments are counter-generated, so they are retained in
/// the sense that any (point, path, step) increment can be reproduced exactly
/// at any later time. States are stored at the requested checkpoints only.
class FlowEnsemble {
public:
    FlowEnsemble(DriftField b, FlowConfig cfg);
    FlowEnsemble(DriftField b, FlowConfig cfg, std::vector<Vec> initial_states);

    int dim() const { return drift_.dim; }
    int n_points() const { return static_cast<int>(cfg_.points.size()); }
    int n_paths() const { return cfg_.n_paths; }
    int n_steps() const { return n_steps_; }
    int n_checkpoints() const { return static_cast<int>(cfg_.checkpoints.size()); }
    const std::vector<double>& checkpoints() const { return cfg_.checkpoints; }
    int checkpoint_index(double time, double tol = 1e-9) const;

    const FlowConfig& config() const { return cfg_; }
    const DriftField& drift() const { return drift_; }
    const Vec& initial_state(int pt, int path) const {
        return init_[static_cast<std::size_t>(pt) * cfg_.n_paths + path];
    }

    const Vec& state(int ck, int pt, int path) const {
        return states_[(static_cast<std::size_t>(ck) * cfg_.points.size() + pt) * cfg_.n_paths +
                       path];
    }

    /// Increment of W over [s + k dt, s + (k+1) dt] for this path bundle.
    Vec brownian_increment(int pt, int path, int k) const;

    /// Sample mean of the normalized increments, and the 4/sqrt(M*steps) gate.
    const std::array<double, 3>& noise_mean() const { return noise_mean_; }
    bool noise_mean_ok() const;
    long escape_count() const { return escape_count_; }

    std::int64_t absolute_step(int k) const { return step_offset_ + k; }
    std::int64_t noise_path_id(int path) const {
        return cfg_.antithetic ? (path >> 1) : path;
    }
    double noise_sign(int path) const {
        return (cfg_.antithetic && (path & 1)) ? -1.0 : 1.0;
    }
    CounterRng rng_for_point(int pt) const {
        return CounterRng(cfg_.seed, cfg_.stream + (cfg_.per_point_noise ? 1 + pt : 0));
    }

private:
    DriftField drift_;
    FlowConfig cfg_;
    int n_steps_ = 0;
    std::int64_t step_offset_ = 0;
    std::vector<Vec> init_;    // [pt][path]
    std::vector<Vec> states_;  // [ck][pt][path]
    std::array<double, 3> noise_mean_ = {0, 0, 0};
    long escape_count_ = 0;

    void integrate();
    void compute_noise_mean();
};

/// d x d matrices per (checkpoint, point, path[, sigma]).
struct DerivativeRecord {
    enum class Kind { spatial, malliavin };
    Kind kind = Kind::spatial;
    int dim = 0;
    int n_checkpoints = 0, n_points = 0, n_paths = 0, n_sigmas = 1;
    std::vector<double> sigmas;  // malliavin base times (empty for spatial)
    std::vector<Mat> mats;

    const Mat& at(int ck, int pt, int path, int sigma = 0) const {
        return mats[((static_cast<std::size_t>(ck) * n_points + pt) * n_paths + path) * n_sigmas +
                    sigma];
    }
    Mat& at_mut(int ck, int pt, int path, int sigma = 0) {
        return mats[((static_cast<std::size_t>(ck) * n_points + pt) * n_paths + path) * n_sigmas +
                    sigma];
    }
};

/// Euler-Maruyama integration of dX = b dt + dW on [s, t].
FlowEnsemble simulate_flow(const DriftField& b, const FlowConfig& cfg);

/// Continues paths from checkpoint r to t_new on the same Brownian stream;
/// grid-time composition X_{s,t} = X_{r,t} o X_{s,r} is bitwise exact.
FlowEnsemble restart_flow(const FlowEnsemble& ens, double r, double t_new,
                          std::vector<double> checkpoints = {});

/// Jacobian J = grad X along each stored path (J' = grad b(t, X) J, J(s) = I).
DerivativeRecord variational_flow(const FlowEnsemble& ens, const DriftField& b);

/// Partial sums S_0 = I, S_1, ..., S_{n_max} of the time-ordered series for
/// grad X, by left-endpoint quadrature on the path grid.
std::vector<DerivativeRecord> chaos_series_gradient(const FlowEnsemble& ens, const DriftField& b,
                                                    int n_max);

/// Malliavin derivatives D_sigma X_t for each grid-aligned sigma;
/// D_sigma X_sigma = I and D_sigma X_t = 0 for sigma > t.
DerivativeRecord malliavin_derivative(const FlowEnsemble& ens, const DriftField& b,
                                      const std::vector<double>& sigmas);

} // namespace sflab::flow
