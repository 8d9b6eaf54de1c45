#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "hm/curve.hpp"
#include "hm/drift.hpp"
#include "hm/grid.hpp"

namespace hm {

/// Per-path statistics to record while a path is generated. Recording is
/// incremental, so ensembles never need to materialize full paths unless
/// store_path is requested.
struct RecorderSpec {
    std::vector<double> probe_times; // capture w(t) at these grid-aligned times
    bool endpoint = false;
    bool running_max = false;
    bool running_min = false;
    std::optional<DriftModel> n_drift;   // trapezoid of mu'(w) + mu^2(w)
    std::optional<Curve> z_tilde_curve;  // log Z~ of the path for this curve
    struct Gap {
        Curve curve;
        bool curve_above; // true: min(g - w); false: min(w - g)
        std::optional<double> window_lo, window_hi; // restrict to a time window
    };
    std::vector<Gap> gaps;
    bool dyadic = false; // max dyadic increments at levels nmin..nmax
    int dyadic_nmin = 4;
    int dyadic_nmax = 10;
    bool store_path = false;
};

/// Immutable per-grid layout: node indices of probes, sampled curve tables,
/// column offsets of every recorded quantity.
class RecorderPlan {
public:
    RecorderPlan(RecorderSpec spec, const TimeGrid& grid);

    const RecorderSpec& spec() const { return spec_; }
    const TimeGrid& grid() const { return grid_; }
    int n_columns() const { return n_cols_; }

    int col_probe(std::size_t j) const { return static_cast<int>(j); }
    int col_probe_at(double t) const; // probe column matching a time, -1 if none
    int col_endpoint() const { return col_endpoint_; }
    int col_running_max() const { return col_runmax_; }
    int col_running_min() const { return col_runmin_; }
    int col_n_integral() const { return col_n_; }
    int col_log_z_tilde() const { return col_zt_; }
    int col_gap(std::size_t j) const { return col_gap_ + static_cast<int>(j); }
    int col_dyadic(int level) const { return col_dyadic_ + (level - spec_.dyadic_nmin); }

    friend class PathRecorder;

private:
    RecorderSpec spec_;
    TimeGrid grid_;
    std::vector<int> probe_idx_;
    std::vector<std::vector<double>> gap_values_; // per gap, per node
    std::vector<std::pair<int, int>> gap_window_; // node index range per gap
    std::vector<double> zt_shift_;                // g(t_i) for the z~ shift
    std::vector<double> zt_g2_;                   // g''(t_i)
    double zt_g1_start_ = 0.0, zt_g1_end_ = 0.0;
    double zt_int_g1sq_ = 0.0;
    std::vector<int> dyadic_stride_;
    int n_cols_ = 0;
    int col_endpoint_ = -1, col_runmax_ = -1, col_runmin_ = -1, col_n_ = -1, col_zt_ = -1;
    int col_gap_ = -1, col_dyadic_ = -1;
};

/// Mutable per-slot accumulator. Copyable so particle systems can permute
/// recorder states on resampling.
class PathRecorder {
public:
    PathRecorder() = default;
    explicit PathRecorder(const RecorderPlan* plan);

    void restart(double x0);
    void step(double x_next); // value at the next node
    void finish(double* row) const;
    const std::vector<double>& path() const { return path_; }

private:
    double n_integrand(double x) const;

    const RecorderPlan* plan_ = nullptr;
    int idx_ = 0;
    std::size_t next_probe_ = 0;
    std::vector<double> probe_vals_;
    double x_ = 0.0;
    double runmax_ = 0.0, runmin_ = 0.0;
    double n_acc_ = 0.0, n_prev_ = 0.0;
    double zt_acc_ = 0.0, zt_prev_ = 0.0, zt_first_ = 0.0;
    std::vector<double> gap_min_;
    std::vector<double> dyadic_last_, dyadic_max_;
    std::vector<double> path_;
};

/// Evaluate the recorded columns of an already-built path.
std::vector<double> record_path(const RecorderPlan& plan, const SamplePath& w);

} // namespace hm
