#include "hm/corridor.hpp"

#include <cmath>

#include "hm/errors.hpp"

namespace hm {

Corridor::Corridor(Curve lo, Curve hi, double a, double b)
    : lower(std::move(lo)), upper(std::move(hi)), t1(a), t2(b) {
    if (!(t1 < t2)) throw ConfigError("corridor.domain", "t1 must be < t2");
    if (min_width() <= 0.0)
        throw ConfigError("corridor", "min over the domain of (upper - lower) must be > 0");
}

double Corridor::min_width(int scan_points) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan_points; ++i) {
        const double t = t1 + (t2 - t1) * i / scan_points;
        m = std::min(m, upper.eval(t) - lower.eval(t));
    }
    return m;
}

double Corridor::max_upper(int scan_points) const {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan_points; ++i)
        m = std::max(m, upper.eval(t1 + (t2 - t1) * i / scan_points));
    return m;
}

double Corridor::min_lower(int scan_points) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan_points; ++i)
        m = std::min(m, lower.eval(t1 + (t2 - t1) * i / scan_points));
    return m;
}

bool corridor_contains(const Corridor& k, const SamplePath& w, double margin_lower,
                       double margin_upper) {
    const TimeGrid& g = w.grid;
    if (g.t_start < k.t1 - 1e-9 || g.t_end > k.t2 + 1e-9)
        throw CompositionError("path grid extends outside the corridor domain");
    for (int i = 0; i < g.n_nodes(); ++i) {
        const double t = g.node(i);
        const double v = w[i];
        if (v < k.lower.eval(t) - margin_lower || v > k.upper.eval(t) + margin_upper) return false;
    }
    return true;
}

} // namespace hm
