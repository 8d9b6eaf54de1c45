#include "hm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hm/errors.hpp"

namespace hm {

MeanSe mean_se(std::span<const double> xs) {
    if (xs.empty()) throw ConfigError("stats", "empty sample");
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v = xs.size() > 1 ? v / (n - 1.0) : 0.0;
    return {m, std::sqrt(v / n)};
}

double ks_asymptotic_p(double d, double n_effective) {
    if (d <= 0.0) return 1.0;
    const double sn = std::sqrt(n_effective);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 101; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        p += sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * p, 0.0, 1.0);
}

namespace {

KsResult ks_impl(std::span<const double> xs, std::span<const double> wx,
                 std::span<const double> ys, std::span<const double> wy) {
    if (xs.empty() || ys.empty()) throw ConfigError("ks", "empty sample");
    std::vector<std::size_t> ix(xs.size()), iy(ys.size());
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(iy.begin(), iy.end(), 0);
    std::sort(ix.begin(), ix.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::sort(iy.begin(), iy.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });

    double sx = 0.0, sx2 = 0.0, sy = 0.0, sy2 = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = wx.empty() ? 1.0 : wx[i];
        sx += w;
        sx2 += w * w;
    }
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double w = wy.empty() ? 1.0 : wy[i];
        sy += w;
        sy2 += w * w;
    }
    if (!(sx > 0.0) || !(sy > 0.0)) throw DegeneracyError("all weights zero", "ks");

    double d = 0.0, cx = 0.0, cy = 0.0;
    std::size_t i = 0, j = 0;
    while (i < xs.size() || j < ys.size()) {
        const double vx = i < xs.size() ? xs[ix[i]] : std::numeric_limits<double>::infinity();
        const double vy = j < ys.size() ? ys[iy[j]] : std::numeric_limits<double>::infinity();
        const double v = std::min(vx, vy);
        while (i < xs.size() && xs[ix[i]] <= v) {
            cx += wx.empty() ? 1.0 : wx[ix[i]];
            ++i;
        }
        while (j < ys.size() && ys[iy[j]] <= v) {
            cy += wy.empty() ? 1.0 : wy[iy[j]];
            ++j;
        }
        d = std::max(d, std::fabs(cx / sx - cy / sy));
    }
    const double n1 = sx * sx / sx2, n2 = sy * sy / sy2;
    const double n = n1 * n2 / (n1 + n2);
    return {d, ks_asymptotic_p(d, n), n};
}

} // namespace

KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
    return ks_impl(xs, {}, ys, {});
}

KsResult ks_two_sample_weighted(std::span<const double> xs, std::span<const double> wx,
                                std::span<const double> ys, std::span<const double> wy) {
    return ks_impl(xs, wx, ys, wy);
}

double weighted_quantile(std::span<const double> xs, std::span<const double> ws, double q) {
    if (xs.empty()) throw ConfigError("stats", "empty sample");
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) total += ws.empty() ? 1.0 : ws[i];
    double acc = 0.0;
    for (std::size_t k : idx) {
        acc += ws.empty() ? 1.0 : ws[k];
        if (acc >= q * total) return xs[k];
    }
    return xs[idx.back()];
}

LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                          std::span<const double> se) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit", "need >= 2 points");
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = se.empty() ? 1.0 : 1.0 / (se[i] * se[i]);
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
        swxx += w * x[i] * x[i];
        swxy += w * x[i] * y[i];
    }
    const double den = sw * swxx - swx * swx;
    if (!(std::fabs(den) > 0.0)) throw NumericError("degenerate design in line fit");
    LineFit f;
    f.slope = (sw * swxy - swx * swy) / den;
    f.intercept = (swxx * swy - swx * swxy) / den;
    f.intercept_se = std::sqrt(swxx / den);
    f.slope_se = std::sqrt(sw / den);
    return f;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

double log_sum_exp(std::span<const double> a) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : a) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : a) s += std::exp(v - m);
    return m + std::log(s);
}

LogMeanExp log_mean_exp(std::span<const double> a) {
    if (a.empty()) throw ConfigError("stats", "empty sample");
    double m = -std::numeric_limits<double>::infinity();
    for (double v : a) m = std::max(m, v);
    if (!std::isfinite(m)) return {m, 0.0};
    double s1 = 0.0, s2 = 0.0;
    for (double v : a) {
        const double e = std::exp(v - m);
        s1 += e;
        s2 += e * e;
    }
    const double n = static_cast<double>(a.size());
    const double mean = s1 / n;
    const double var = std::max(0.0, s2 / n - mean * mean) / std::max(1.0, n - 1.0) * n;
    const double se = std::sqrt(var / n);
    return {m + std::log(mean), se / mean};
}

double gaussian_density(double s, double z) {
    return std::exp(-z * z / (2.0 * s)) / std::sqrt(6.283185307179586 * s);
}

} // namespace hm
