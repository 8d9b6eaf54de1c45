#include "hm/ensemble.hpp"

#include <cmath>
#include <limits>

#include "hm/errors.hpp"

namespace hm {

std::vector<double> WeightedEnsemble::column(int col) const {
    std::vector<double> out(count());
    for (std::size_t i = 0; i < count(); ++i) out[i] = row(i, col);
    return out;
}

SamplePath WeightedEnsemble::path(std::size_t i) const {
    if (!has_paths) throw CompositionError("ensemble was built without stored paths");
    const std::size_t n = static_cast<std::size_t>(plan->grid().n_nodes());
    std::vector<double> v(path_matrix.begin() + static_cast<std::ptrdiff_t>(i * n),
                          path_matrix.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    return SamplePath{plan->grid(), std::move(v)};
}

double WeightedEnsemble::ess() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) m = std::max(m, lw);
    if (!std::isfinite(m)) return 0.0;
    double s = 0.0, s2 = 0.0;
    for (double lw : log_weights) {
        const double w = std::exp(lw - m);
        s += w;
        s2 += w * w;
    }
    return s * s / s2;
}

SnisResult snis(std::span<const double> log_w, std::span<const double> f) {
    if (log_w.empty() || log_w.size() != f.size())
        throw ConfigError("snis", "weight/value size mismatch or empty ensemble");
    double m = -std::numeric_limits<double>::infinity();
    for (double lw : log_w) m = std::max(m, lw);
    if (!std::isfinite(m)) throw DegeneracyError("all weights zero", "snis");
    double sw = 0.0;
    for (std::size_t i = 0; i < log_w.size(); ++i) sw += std::exp(log_w[i] - m);
    double sf = 0.0;
    for (std::size_t i = 0; i < log_w.size(); ++i) sf += std::exp(log_w[i] - m) * f[i];
    const double est = sf / sw;
    double var = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < log_w.size(); ++i) {
        const double wn = std::exp(log_w[i] - m) / sw;
        var += wn * wn * (f[i] - est) * (f[i] - est);
        s2 += wn * wn;
    }
    return {est, std::sqrt(var), 1.0 / s2};
}

SnisResult snis_column(const WeightedEnsemble& e, int col, std::span<const double> extra_log_w) {
    return snis_apply(
        e, [col](const double* r) { return r[col]; }, extra_log_w);
}

SnisResult snis_apply(const WeightedEnsemble& e, const std::function<double(const double*)>& f,
                      std::span<const double> extra_log_w) {
    const std::size_t n = e.count();
    std::vector<double> lw(n), fv(n);
    const int nc = e.n_columns();
    for (std::size_t i = 0; i < n; ++i) {
        lw[i] = e.log_weights[i] + (extra_log_w.empty() ? 0.0 : extra_log_w[i]);
        fv[i] = f(&e.rows[i * static_cast<std::size_t>(nc)]);
    }
    return snis(lw, fv);
}

LogRatioResult snis_log_exp(std::span<const double> log_w, std::span<const double> a) {
    if (log_w.empty() || log_w.size() != a.size())
        throw ConfigError("snis", "weight/value size mismatch or empty ensemble");
    const std::size_t n = log_w.size();
    double mw = -std::numeric_limits<double>::infinity();
    double mwa = mw;
    for (std::size_t i = 0; i < n; ++i) {
        mw = std::max(mw, log_w[i]);
        mwa = std::max(mwa, log_w[i] + a[i]);
    }
    if (!std::isfinite(mw)) throw DegeneracyError("all weights zero", "snis_log_exp");
    double sw = 0.0, swa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += std::exp(log_w[i] - mw);
        swa += std::exp(log_w[i] + a[i] - mwa);
    }
    const double log_ratio = (mwa + std::log(swa)) - (mw + std::log(sw));
    // Delta-method SE of log ratio using normalized weights and f = e^{a}.
    double var = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wn = std::exp(log_w[i] - mw) / sw;
        const double dev = std::exp(a[i] - log_ratio) - 1.0;
        var += wn * wn * dev * dev;
        s2 += wn * wn;
    }
    return {log_ratio, std::sqrt(var), 1.0 / s2};
}

} // namespace hm
