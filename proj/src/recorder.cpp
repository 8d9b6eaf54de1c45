#include "hm/recorder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hm/errors.hpp"

namespace hm {

RecorderPlan::RecorderPlan(RecorderSpec spec, const TimeGrid& grid)
    : spec_(std::move(spec)), grid_(grid) {
    std::sort(spec_.probe_times.begin(), spec_.probe_times.end());
    spec_.probe_times.erase(std::unique(spec_.probe_times.begin(), spec_.probe_times.end(),
                                        [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
                            spec_.probe_times.end());
    for (double t : spec_.probe_times) probe_idx_.push_back(grid_.index_of(t));

    int c = static_cast<int>(probe_idx_.size());
    if (spec_.endpoint) col_endpoint_ = c++;
    if (spec_.running_max) col_runmax_ = c++;
    if (spec_.running_min) col_runmin_ = c++;
    if (spec_.n_drift) col_n_ = c++;
    if (spec_.z_tilde_curve) {
        col_zt_ = c++;
        const Curve& g = *spec_.z_tilde_curve;
        zt_shift_ = g.sample(grid_, 0);
        zt_g2_ = g.sample(grid_, 2);
        zt_g1_start_ = g.eval(grid_.t_start, 1);
        zt_g1_end_ = g.eval(grid_.t_end, 1);
        const auto g1 = g.sample(grid_, 1);
        double acc = 0.0;
        for (int i = 1; i < grid_.n_nodes(); ++i)
            acc += 0.5 * (g1[i - 1] * g1[i - 1] + g1[i] * g1[i]);
        zt_int_g1sq_ = acc * grid_.dt();
    }
    if (!spec_.gaps.empty()) {
        col_gap_ = c;
        c += static_cast<int>(spec_.gaps.size());
        for (const auto& gp : spec_.gaps) {
            gap_values_.push_back(gp.curve.sample(grid_, 0));
            const int lo = gp.window_lo ? grid_.index_of(*gp.window_lo) : 0;
            const int hi = gp.window_hi ? grid_.index_of(*gp.window_hi) : grid_.n_steps;
            gap_window_.emplace_back(lo, hi);
        }
    }
    if (spec_.dyadic) {
        col_dyadic_ = c;
        c += spec_.dyadic_nmax - spec_.dyadic_nmin + 1;
        for (int n = spec_.dyadic_nmin; n <= spec_.dyadic_nmax; ++n) {
            const int blocks = 1 << n;
            if (grid_.n_steps % blocks != 0)
                throw ConfigError("recorder.dyadic",
                                  "n_steps must be divisible by 2^" + std::to_string(n));
            dyadic_stride_.push_back(grid_.n_steps / blocks);
        }
    }
    n_cols_ = c;
}

int RecorderPlan::col_probe_at(double t) const {
    for (std::size_t j = 0; j < spec_.probe_times.size(); ++j)
        if (std::fabs(spec_.probe_times[j] - t) < 1e-12) return static_cast<int>(j);
    return -1;
}

PathRecorder::PathRecorder(const RecorderPlan* plan) : plan_(plan) {
    probe_vals_.resize(plan_->probe_idx_.size());
    gap_min_.resize(plan_->gap_values_.size());
    dyadic_last_.resize(plan_->dyadic_stride_.size());
    dyadic_max_.resize(plan_->dyadic_stride_.size());
    if (plan_->spec_.store_path) path_.reserve(static_cast<std::size_t>(plan_->grid_.n_nodes()));
}

double PathRecorder::n_integrand(double x) const {
    const DriftModel& d = *plan_->spec_.n_drift;
    const double m = d.mu(x);
    return d.mu_prime(x) + m * m;
}

void PathRecorder::restart(double x0) {
    const RecorderSpec& s = plan_->spec_;
    idx_ = 0;
    x_ = x0;
    next_probe_ = 0;
    while (next_probe_ < plan_->probe_idx_.size() && plan_->probe_idx_[next_probe_] == 0)
        probe_vals_[next_probe_++] = x0;
    runmax_ = runmin_ = x0;
    if (s.n_drift) {
        n_acc_ = 0.0;
        n_prev_ = n_integrand(x0);
    }
    if (s.z_tilde_curve) {
        zt_first_ = x0 + plan_->zt_shift_[0];
        zt_prev_ = zt_first_ * plan_->zt_g2_[0];
        zt_acc_ = 0.0;
    }
    for (std::size_t j = 0; j < gap_min_.size(); ++j) {
        if (plan_->gap_window_[j].first > 0) {
            gap_min_[j] = std::numeric_limits<double>::infinity();
            continue;
        }
        const double g = plan_->gap_values_[j][0];
        gap_min_[j] = s.gaps[j].curve_above ? g - x0 : x0 - g;
    }
    for (std::size_t l = 0; l < dyadic_last_.size(); ++l) {
        dyadic_last_[l] = x0;
        dyadic_max_[l] = 0.0;
    }
    if (s.store_path) {
        path_.clear();
        path_.push_back(x0);
    }
}

void PathRecorder::step(double x) {
    const RecorderSpec& s = plan_->spec_;
    ++idx_;
    x_ = x;
    while (next_probe_ < plan_->probe_idx_.size() && plan_->probe_idx_[next_probe_] == idx_)
        probe_vals_[next_probe_++] = x;
    runmax_ = std::max(runmax_, x);
    runmin_ = std::min(runmin_, x);
    if (s.n_drift) {
        const double cur = n_integrand(x);
        n_acc_ += 0.5 * (n_prev_ + cur);
        n_prev_ = cur;
    }
    if (s.z_tilde_curve) {
        const std::size_t i = static_cast<std::size_t>(idx_);
        const double cur = (x + plan_->zt_shift_[i]) * plan_->zt_g2_[i];
        zt_acc_ += 0.5 * (zt_prev_ + cur);
        zt_prev_ = cur;
    }
    for (std::size_t j = 0; j < gap_min_.size(); ++j) {
        if (idx_ < plan_->gap_window_[j].first || idx_ > plan_->gap_window_[j].second) continue;
        const double g = plan_->gap_values_[j][static_cast<std::size_t>(idx_)];
        gap_min_[j] = std::min(gap_min_[j], s.gaps[j].curve_above ? g - x : x - g);
    }
    for (std::size_t l = 0; l < dyadic_last_.size(); ++l) {
        if (idx_ % plan_->dyadic_stride_[l] == 0) {
            dyadic_max_[l] = std::max(dyadic_max_[l], std::fabs(x - dyadic_last_[l]));
            dyadic_last_[l] = x;
        }
    }
    if (s.store_path) path_.push_back(x);
}

void PathRecorder::finish(double* row) const {
    const RecorderSpec& s = plan_->spec_;
    const RecorderPlan& p = *plan_;
    for (std::size_t j = 0; j < probe_vals_.size(); ++j) row[j] = probe_vals_[j];
    if (p.col_endpoint_ >= 0) row[p.col_endpoint_] = x_;
    if (p.col_runmax_ >= 0) row[p.col_runmax_] = runmax_;
    if (p.col_runmin_ >= 0) row[p.col_runmin_] = runmin_;
    if (p.col_n_ >= 0) row[p.col_n_] = n_acc_ * p.grid_.dt();
    if (p.col_zt_ >= 0)
        row[p.col_zt_] = p.zt_g1_end_ * (x_ + p.zt_shift_.back()) - p.zt_g1_start_ * zt_first_ -
                         zt_acc_ * p.grid_.dt() - 0.5 * p.zt_int_g1sq_;
    for (std::size_t j = 0; j < gap_min_.size(); ++j) row[p.col_gap_ + static_cast<int>(j)] = gap_min_[j];
    for (std::size_t l = 0; l < dyadic_max_.size(); ++l)
        row[p.col_dyadic_ + static_cast<int>(l)] = dyadic_max_[l];
}

std::vector<double> record_path(const RecorderPlan& plan, const SamplePath& w) {
    if (!(w.grid == plan.grid())) throw CompositionError("path grid does not match recorder plan");
    PathRecorder rec(&plan);
    rec.restart(w[0]);
    for (int i = 1; i < w.grid.n_nodes(); ++i) rec.step(w[i]);
    std::vector<double> row(static_cast<std::size_t>(plan.n_columns()));
    rec.finish(row.data());
    return row;
}

} // namespace hm
