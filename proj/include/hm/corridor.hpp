#pragma once

#include "hm/curve.hpp"
#include "hm/grid.hpp"

namespace hm {

/// The region between two curves g- <= g+ over a closed time interval.
/// Boundary inclusion is closed on both sides.
struct Corridor {
    Curve lower;
    Curve upper;
    double t1 = 0.0;
    double t2 = 1.0;

    Corridor() = default;
    Corridor(Curve lo, Curve hi, double a = 0.0, double b = 1.0);

    /// Minimum of (g+ - g-) over a dense grid of the domain.
    double min_width(int scan_points = 2048) const;
    double max_upper(int scan_points = 2048) const;
    double min_lower(int scan_points = 2048) const;

    /// Right-endpoint value of the upper curve; the house-moving target level.
    double b() const { return upper.eval(t2); }
    /// True when this corridor supports the house-moving construction:
    /// g-(t1) == 0 within tolerance.
    bool is_housemoving() const { return std::abs(lower.eval(t1)) < 1e-12; }

    Corridor restricted(double a, double b) const { return Corridor(lower, upper, a, b); }
    Corridor reversed() const {
        return Corridor(lower.reversed(t1, t2), upper.reversed(t1, t2), t1, t2);
    }
};

/// Node-wise membership with one-sided margins:
/// g-(t_i) - margin_lower <= w(t_i) <= g+(t_i) + margin_upper at every node.
bool corridor_contains(const Corridor& k, const SamplePath& w, double margin_lower = 0.0,
                       double margin_upper = 0.0);

} // namespace hm
