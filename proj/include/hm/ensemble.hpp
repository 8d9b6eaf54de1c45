#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hm/grid.hpp"
#include "hm/recorder.hpp"

namespace hm {

/// A weighted ensemble in recorded form: one row of statistics per path plus
/// its sampling log-weight. Full path values are attached only on request.
struct WeightedEnsemble {
    std::shared_ptr<const RecorderPlan> plan;
    std::vector<double> rows;        // count x n_columns, row-major
    std::vector<double> log_weights; // sampling weights (survival / SMC)
    std::vector<int> island_of;      // island id per row; empty when iid
    int n_islands = 1;

    double log_survival = 0.0; // log of the estimated normalizing constant
    double log_survival_se = 0.0;
    double acceptance_rate = 1.0;
    std::uint64_t attempts = 0;

    std::vector<double> path_matrix; // count x n_nodes when paths stored
    bool has_paths = false;

    std::size_t count() const { return log_weights.size(); }
    int n_columns() const { return plan ? plan->n_columns() : 0; }
    double row(std::size_t i, int col) const {
        return rows[i * static_cast<std::size_t>(n_columns()) + static_cast<std::size_t>(col)];
    }
    std::vector<double> column(int col) const;
    SamplePath path(std::size_t i) const;

    /// Effective sample size (sum w)^2 / (sum w^2) of the pooled weights.
    double ess() const;
};

struct SnisResult {
    double estimate = 0.0;
    double std_err = 0.0;
    double ess = 0.0;
};

/// Self-normalized importance sampling: sum(w f)/sum(w) with the delta-method
/// standard error. Weights are exponentiated after max-log subtraction, so a
/// constant shift of all log-weights leaves the result bit-identical.
SnisResult snis(std::span<const double> log_w, std::span<const double> f);

/// SNIS over a recorded column; extra_log_w (e.g. Girsanov -N/2) is added to
/// the sampling log-weights.
SnisResult snis_column(const WeightedEnsemble& e, int col,
                       std::span<const double> extra_log_w = {});

/// SNIS of a derived per-path value f(row).
SnisResult snis_apply(const WeightedEnsemble& e, const std::function<double(const double*)>& f,
                      std::span<const double> extra_log_w = {});

/// E[exp(a)] under SNIS weights, evaluated in log space:
/// log( sum w e^{a} / sum w ) with a relative standard error.
struct LogRatioResult {
    double log_value = 0.0;
    double rel_se = 0.0;
    double ess = 0.0;
};
LogRatioResult snis_log_exp(std::span<const double> log_w, std::span<const double> a);

} // namespace hm
