#pragma once

#include "hm/drift.hpp"
#include "hm/grid.hpp"
#include "hm/rng.hpp"

namespace hm {

/// Brownian motion from a, increments sqrt(dt) * N(0,1).
SamplePath sample_brownian(RngStream rng, const TimeGrid& grid, double a = 0.0);

/// Brownian bridge from a to b by forward conditional-Gaussian recursion;
/// endpoints are exact.
SamplePath sample_bridge(RngStream rng, const TimeGrid& grid, double a, double b);

/// BES(3) bridge from c to d (c,d >= 0): the norm of a 3-d Brownian bridge
/// from (c,0,0) to (d,0,0).
SamplePath sample_bes3_bridge(RngStream rng, const TimeGrid& grid, double c, double d);

/// Brownian meander started at 0: a BES(3) bridge from 0 to a Rayleigh
/// endpoint r * sqrt(t_end - t_start), which reproduces the meander law
/// exactly at the grid nodes.
SamplePath sample_meander(RngStream rng, const TimeGrid& grid);

/// Euler-Maruyama path of dX = mu(X) dt + dW from a. Throws NumericError
/// naming the step if the state stops being finite.
SamplePath sample_diffusion(RngStream rng, const TimeGrid& grid, const DriftModel& d, double a);

/// Girsanov proposal for an X-bridge: a Brownian bridge together with its
/// log-weight -N(w)/2. Self-normalized averages over many draws estimate
/// X-bridge expectations.
struct WeightedPath {
    SamplePath path;
    double log_weight;
};
WeightedPath sample_diffusion_bridge(RngStream rng, const TimeGrid& grid, const DriftModel& d,
                                     double a, double b);

} // namespace hm
