#pragma once

#include <filesystem>
#include <ostream>

#include "sflab/flow.hpp"
#include "sflab/periodic_field.hpp"

namespace sflab::io {

/// Binary grid-field format "SFLD1": a short text header
///
///   SFLD1
///   dim=<d>
///   grid=<n>
///   components=<c>
///   times=<t0>,<t1>,...
///   end
///
/// followed by float64 little-endian data laid out [time][component][node],
/// nodes row-major with axis 0 slowest.
void write_field(const std::filesystem::path& path, const SpaceTimeField& field);
SpaceTimeField read_field(const std::filesystem::path& path);

void write_snapshot(const std::filesystem::path& path, const PeriodicField& frame,
                    double time = 0.0);

/// Per-checkpoint summary: componentwise mean and variance over (points,
/// paths), and mean Frobenius distance of the derivative record from the
/// identity when one is supplied.
void write_ensemble_csv(std::ostream& os, const flow::FlowEnsemble& ens,
                        const flow::DerivativeRecord* derivs = nullptr);

/// Checkpoint means as grid fields (requires the ensemble's points to be the
/// n^d torus grid in row-major order).
SpaceTimeField ensemble_mean_field(const flow::FlowEnsemble& ens, int points_per_axis);

} // namespace sflab::io
