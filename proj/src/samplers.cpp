#include "hm/samplers.hpp"

#include <cmath>
#include <string>

#include "hm/errors.hpp"

namespace hm {

SamplePath sample_brownian(RngStream rng, const TimeGrid& grid, double a) {
    std::vector<double> v(static_cast<std::size_t>(grid.n_nodes()));
    const double s = std::sqrt(grid.dt());
    v[0] = a;
    for (int i = 1; i <= grid.n_steps; ++i)
        v[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i - 1)] + s * rng.normal();
    return SamplePath{grid, std::move(v)};
}

SamplePath sample_bridge(RngStream rng, const TimeGrid& grid, double a, double b) {
    const int n = grid.n_steps;
    const double dt = grid.dt();
    std::vector<double> v(static_cast<std::size_t>(n + 1));
    v[0] = a;
    double x = a;
    for (int i = 1; i < n; ++i) {
        const double tau = (n - i + 1) * dt; // time remaining before this step
        const double mean = x + (b - x) * dt / tau;
        const double var = dt * (tau - dt) / tau;
        x = mean + std::sqrt(var) * rng.normal();
        v[static_cast<std::size_t>(i)] = x;
    }
    v[static_cast<std::size_t>(n)] = b;
    return SamplePath{grid, std::move(v)};
}

SamplePath sample_bes3_bridge(RngStream rng, const TimeGrid& grid, double c, double d) {
    if (c < 0.0 || d < 0.0) throw DomainError("BES(3) bridge endpoints must be >= 0");
    SamplePath x = sample_bridge(rng.substream(0), grid, c, d);
    SamplePath y = sample_bridge(rng.substream(1), grid, 0.0, 0.0);
    SamplePath z = sample_bridge(rng.substream(2), grid, 0.0, 0.0);
    std::vector<double> v(x.values.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::sqrt(x.values[i] * x.values[i] + y.values[i] * y.values[i] +
                         z.values[i] * z.values[i]);
    // Endpoints are exact by construction: |(c,0,0)| = c, |(d,0,0)| = d.
    v.front() = c;
    v.back() = d;
    return SamplePath{grid, std::move(v)};
}

SamplePath sample_meander(RngStream rng, const TimeGrid& grid) {
    RngStream end_rng = rng.substream(3);
    const double r = std::sqrt(grid.t_end - grid.t_start) * end_rng.rayleigh();
    return sample_bes3_bridge(rng, grid, 0.0, r);
}

SamplePath sample_diffusion(RngStream rng, const TimeGrid& grid, const DriftModel& d, double a) {
    const double dt = grid.dt();
    const double s = std::sqrt(dt);
    std::vector<double> v(static_cast<std::size_t>(grid.n_nodes()));
    v[0] = a;
    double x = a;
    for (int i = 1; i <= grid.n_steps; ++i) {
        x += d.mu(x) * dt + s * rng.normal();
        if (!std::isfinite(x))
            throw NumericError("diffusion state became non-finite at step " + std::to_string(i));
        v[static_cast<std::size_t>(i)] = x;
    }
    return SamplePath{grid, std::move(v)};
}

WeightedPath sample_diffusion_bridge(RngStream rng, const TimeGrid& grid, const DriftModel& d,
                                     double a, double b) {
    WeightedPath out;
    out.path = sample_bridge(rng, grid, a, b);
    out.log_weight = -0.5 * eval_N(d, out.path);
    return out;
}

} // namespace hm
