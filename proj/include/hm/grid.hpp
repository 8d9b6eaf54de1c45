#pragma once

#include <span>
#include <vector>

namespace hm {

/// Uniform grid on [t_start, t_end] with n_steps intervals (n_steps+1 nodes).
struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    int n_steps = 1;

    TimeGrid() = default;
    TimeGrid(double t0, double t1, int n);

    double dt() const { return (t_end - t_start) / n_steps; }
    int n_nodes() const { return n_steps + 1; }
    double node(int i) const {
        return i == n_steps ? t_end : t_start + i * dt();
    }
    /// Index of the node closest to t; throws CompositionError if t does not
    /// lie on the grid (within 1e-9 absolute).
    int index_of(double t) const;

    bool operator==(const TimeGrid& o) const = default;
};

/// A path sampled at the nodes of a uniform grid.
struct SamplePath {
    TimeGrid grid;
    std::vector<double> values;

    SamplePath() = default;
    explicit SamplePath(TimeGrid g)
        : grid(g), values(static_cast<std::size_t>(g.n_nodes()), 0.0) {}
    SamplePath(TimeGrid g, std::vector<double> v);

    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
    double front() const { return values.front(); }
    double back() const { return values.back(); }
    /// Value at a node time (the time must lie on the grid).
    double at_time(double t) const { return values[static_cast<std::size_t>(grid.index_of(t))]; }
    bool all_finite() const;
};

/// Join adjacent paths left-closed: at an interior junction the later part's
/// value wins. Parts must share boundary times and step size.
SamplePath splice(std::span<const SamplePath> parts);
SamplePath splice(const SamplePath& a, const SamplePath& b);
SamplePath splice(const SamplePath& a, const SamplePath& b, const SamplePath& c);

/// Time reversal on the same grid: out(t) = in(t_start + t_end - t).
SamplePath reverse_path(const SamplePath& w);

} // namespace hm
