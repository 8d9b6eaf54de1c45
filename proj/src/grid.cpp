#include "hm/grid.hpp"

#include <cmath>
#include <cstdlib>

#include "hm/errors.hpp"

namespace hm {

TimeGrid::TimeGrid(double t0, double t1, int n) : t_start(t0), t_end(t1), n_steps(n) {
    if (!(t0 < t1)) throw ConfigError("grid", "t_start must be < t_end");
    if (n < 1) throw ConfigError("grid", "n_steps must be >= 1");
}

int TimeGrid::index_of(double t) const {
    const long long i = std::llround((t - t_start) / dt());
    if (i < 0 || i > n_steps || std::fabs(node(static_cast<int>(i)) - t) > 1e-9)
        throw CompositionError("time does not lie on the grid");
    return static_cast<int>(i);
}

SamplePath::SamplePath(TimeGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(grid.n_nodes()))
        throw CompositionError("value count does not match grid nodes");
}

bool SamplePath::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

SamplePath splice(std::span<const SamplePath> parts) {
    if (parts.empty()) throw CompositionError("splice of zero parts");
    if (parts.size() == 1) return parts[0];

    const double dt0 = parts[0].grid.dt();
    int total_steps = parts[0].grid.n_steps;
    for (std::size_t k = 1; k < parts.size(); ++k) {
        const TimeGrid& prev = parts[k - 1].grid;
        const TimeGrid& cur = parts[k].grid;
        if (std::fabs(cur.t_start - prev.t_end) > 1e-9)
            throw CompositionError("splice parts are not adjacent in time");
        if (std::fabs(cur.dt() - dt0) > 1e-12 * (1.0 + std::fabs(dt0)))
            throw CompositionError("splice parts have different step sizes");
        total_steps += cur.n_steps;
    }

    TimeGrid grid{parts.front().grid.t_start, parts.back().grid.t_end, total_steps};
    std::vector<double> out(static_cast<std::size_t>(grid.n_nodes()));
    std::size_t pos = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& v = parts[k].values;
        // Interior junction node is overwritten by the later part.
        for (std::size_t j = 0; j < v.size(); ++j) out[pos + j] = v[j];
        pos += v.size() - 1;
    }
    return SamplePath{grid, std::move(out)};
}

SamplePath splice(const SamplePath& a, const SamplePath& b) {
    const SamplePath parts[] = {a, b};
    return splice(std::span<const SamplePath>(parts, 2));
}

SamplePath splice(const SamplePath& a, const SamplePath& b, const SamplePath& c) {
    const SamplePath parts[] = {a, b, c};
    return splice(std::span<const SamplePath>(parts, 3));
}

SamplePath reverse_path(const SamplePath& w) {
    SamplePath out = w;
    const std::size_t n = out.values.size();
    for (std::size_t i = 0; i < n; ++i) out.values[i] = w.values[n - 1 - i];
    return out;
}

} // namespace hm
