#include "hm/drift.hpp"

#include <algorithm>
#include <cmath>

#include "hm/errors.hpp"

namespace hm {

struct ScalarField::Impl {
    virtual ~Impl() = default;
    virtual double eval(double x, int order) const = 0;
    virtual bool is_zero() const { return false; }
    virtual bool has_integral() const { return false; }
    virtual double integral(double) const { throw NumericError("no analytic integral"); }
};

namespace {

struct FieldPoly final : ScalarField::Impl {
    std::vector<double> c;
    explicit FieldPoly(std::vector<double> coeffs) : c(std::move(coeffs)) {
        if (c.empty()) c.push_back(0.0);
    }
    double eval(double x, int order) const override {
        double acc = 0.0;
        for (std::size_t k = c.size(); k-- > static_cast<std::size_t>(order);) {
            double factor = 1.0;
            for (int j = 0; j < order; ++j) factor *= static_cast<double>(k - j);
            acc = acc * x + factor * c[k];
        }
        return acc;
    }
    bool is_zero() const override {
        return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
    }
    bool has_integral() const override { return true; }
    double integral(double y) const override {
        double acc = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) acc = acc * y + c[k] / static_cast<double>(k + 1);
        return acc * y;
    }
};

struct FieldTabulated final : ScalarField::Impl {
    std::vector<double> xs, f, df, m;
    FieldTabulated(std::vector<double> x, std::vector<double> f_, std::vector<double> df_)
        : xs(std::move(x)), f(std::move(f_)), df(std::move(df_)) {
        const std::size_t n = xs.size();
        if (n < 3 || f.size() != n || df.size() != n)
            throw ConfigError("field.tabulated", "tables must share one grid with >= 3 nodes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(xs[i] > xs[i - 1]))
                throw ConfigError("field.tabulated", "grid must be strictly increasing");
        build_spline();
    }
    void build_spline() {
        const std::size_t n = xs.size();
        m.assign(n, 0.0);
        std::vector<double> a(n, 0.0), b(n, 0.0), cc(n, 0.0), d(n, 0.0);
        b[0] = b[n - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            cc[i] = h1 / 6.0;
            d[i] = (f[i + 1] - f[i]) / h1 - (f[i] - f[i - 1]) / h0;
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * cc[i - 1];
            d[i] -= w * d[i - 1];
        }
        m[n - 1] = d[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m[i] = (d[i] - cc[i] * m[i + 1]) / b[i];
    }
    std::size_t segment(double x) const {
        if (x < xs.front() - 1e-12 || x > xs.back() + 1e-12)
            throw DomainError("tabulated field queried outside its grid");
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t i = static_cast<std::size_t>(it - xs.begin());
        if (i == 0) i = 1;
        if (i >= xs.size()) i = xs.size() - 1;
        return i - 1;
    }
    double eval(double x, int order) const override {
        const std::size_t i = segment(x);
        const double h = xs[i + 1] - xs[i];
        if (order == 0) {
            const double u = (xs[i + 1] - x) / h, v = (x - xs[i]) / h;
            return u * f[i] + v * f[i + 1] +
                   ((u * u * u - u) * m[i] + (v * v * v - v) * m[i + 1]) * h * h / 6.0;
        }
        if (order == 1) {
            const double v = (x - xs[i]) / h;
            return (1.0 - v) * df[i] + v * df[i + 1];
        }
        return (df[i + 1] - df[i]) / h; // piecewise-constant second derivative
    }
};

struct FieldCustom final : ScalarField::Impl {
    std::function<double(double, int)> fn;
    explicit FieldCustom(std::function<double(double, int)> f) : fn(std::move(f)) {}
    double eval(double x, int order) const override { return fn(x, order); }
};

// Adaptive Simpson quadrature.
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fb,
               double fm, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw NumericError("adaptive quadrature did not converge");
    if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson(f, a, m, fa, fm, flm, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, fb, frm, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fb, fm, tol, 48);
}

} // namespace

double ScalarField::eval(double x, int order) const {
    const double v = impl_->eval(x, order);
    if (!std::isfinite(v)) throw NumericError("field evaluation is not finite");
    return v;
}

#define HM_FIELD(ImplT, ...)                                                           \
    ScalarField(std::shared_ptr<const Impl>(std::make_shared<const ImplT>(__VA_ARGS__)))

ScalarField ScalarField::zero() { return HM_FIELD(FieldPoly, std::vector<double>{0.0}); }
ScalarField ScalarField::constant(double c) { return HM_FIELD(FieldPoly, std::vector<double>{c}); }
ScalarField ScalarField::linear(double a, double b) {
    return HM_FIELD(FieldPoly, std::vector<double>{a, b});
}
ScalarField ScalarField::polynomial(std::vector<double> coeffs) {
    return HM_FIELD(FieldPoly, std::move(coeffs));
}
ScalarField ScalarField::custom(std::function<double(double, int)> fn) {
    return HM_FIELD(FieldCustom, std::move(fn));
}

ScalarField ScalarField::tabulated(std::vector<double> xs, std::vector<double> f,
                                   std::vector<double> df, double derivative_tol) {
    ScalarField s = HM_FIELD(FieldTabulated, std::move(xs), std::move(f), std::move(df));
    const auto* impl = static_cast<const FieldTabulated*>(s.impl_.get());
    for (std::size_t i = 1; i + 1 < impl->xs.size(); ++i) {
        const double fd =
            (impl->f[i + 1] - impl->f[i - 1]) / (impl->xs[i + 1] - impl->xs[i - 1]);
        if (std::fabs(fd - impl->df[i]) > derivative_tol)
            throw ConfigError("field.tabulated",
                              "f' table inconsistent with finite differences of f");
    }
    return s;
}

#undef HM_FIELD

bool ScalarField::is_zero() const { return impl_->is_zero(); }
bool ScalarField::has_analytic_integral() const { return impl_->has_integral(); }
double ScalarField::analytic_integral(double y) const { return impl_->integral(y); }

double DriftModel::G(double y) const {
    if (mu_.has_analytic_integral()) return mu_.analytic_integral(y);
    return integrate([this](double x) { return mu_.eval(x, 0); }, 0.0, y, 1e-10);
}

double eval_N(const DriftModel& d, const SamplePath& w) {
    if (d.is_zero()) return 0.0;
    const double dt = w.grid.dt();
    double acc = 0.0;
    const int n = w.grid.n_steps;
    double prev = [&] {
        const double x = w[0];
        const double m = d.mu(x);
        return d.mu_prime(x) + m * m;
    }();
    for (int i = 1; i <= n; ++i) {
        const double x = w[i];
        const double m = d.mu(x);
        const double cur = d.mu_prime(x) + m * m;
        acc += 0.5 * (prev + cur);
        prev = cur;
    }
    return acc * dt;
}

double c_mu_bound(const DriftModel& d, const Corridor& k, double delta) {
    if (!(delta > 0.0)) throw ConfigError("c_mu.delta", "delta must be > 0");
    const double lo = k.min_lower() - delta;
    const double hi = k.max_upper() + delta;
    const auto f = [&](double x) {
        const double m = d.mu(x);
        return -(d.mu_prime(x) + m * m);
    };
    const int n = 4096;
    double best = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i <= n; ++i) {
        const double v = f(lo + (hi - lo) * i / n);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement in the bracketing cell around the argmax.
    double a = lo + (hi - lo) * std::max(0, best_i - 1) / n;
    double b = lo + (hi - lo) * std::min(n, best_i + 1) / n;
    const double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        }
    }
    best = std::max(best, std::max(f1, f2));
    return std::max(0.0, best);
}

double log_cameron_martin_Z(const Curve& g, const SamplePath& w) {
    const TimeGrid& grid = w.grid;
    const double dt = grid.dt();
    const int n = grid.n_steps;
    double int_wg2 = 0.0, int_g1sq = 0.0;
    double prev_wg2, prev_g1sq;
    {
        const double t = grid.node(0);
        prev_wg2 = w[0] * g.eval(t, 2);
        const double g1 = g.eval(t, 1);
        prev_g1sq = g1 * g1;
    }
    for (int i = 1; i <= n; ++i) {
        const double t = grid.node(i);
        const double cur_wg2 = w[i] * g.eval(t, 2);
        const double g1 = g.eval(t, 1);
        const double cur_g1sq = g1 * g1;
        int_wg2 += 0.5 * (prev_wg2 + cur_wg2);
        int_g1sq += 0.5 * (prev_g1sq + cur_g1sq);
        prev_wg2 = cur_wg2;
        prev_g1sq = cur_g1sq;
    }
    int_wg2 *= dt;
    int_g1sq *= dt;
    return g.eval(grid.t_end, 1) * w.back() - g.eval(grid.t_start, 1) * w.front() - int_wg2 -
           0.5 * int_g1sq;
}

double log_cameron_martin_Z_tilde(const Curve& g, const SamplePath& w) {
    SamplePath shifted = w;
    for (int i = 0; i < w.grid.n_nodes(); ++i) shifted[i] += g.eval(w.grid.node(i));
    return log_cameron_martin_Z(g, shifted);
}

LampertiResult lamperti_transform(const SdeModel& m, double y_min, double y_max) {
    if (!(y_min < 0.0 && y_max > 0.0))
        throw ConfigError("lamperti.range", "range must contain 0");
    const int scan = 4096;
    for (int i = 0; i <= scan; ++i) {
        const double y = y_min + (y_max - y_min) * i / scan;
        if (!(m.sigma.eval(y, 0) > 0.0))
            throw ConfigError("sde.sigma", "sigma must be > 0 on the declared range");
    }
    const ScalarField sigma = m.sigma;
    const ScalarField nu = m.nu;

    auto L = [sigma](double y) {
        return integrate([&sigma](double u) { return 1.0 / sigma.eval(u, 0); }, 0.0, y, 1e-12);
    };
    const double x_lo = L(y_min), x_hi = L(y_max);
    auto L_inv = [sigma, L, y_min, y_max, x_lo, x_hi](double x) {
        if (x < x_lo - 1e-12 || x > x_hi + 1e-12)
            throw DomainError("Lamperti inverse queried outside the transformed range");
        double lo = y_min, hi = y_max;
        double y = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            const double err = L(y) - x;
            if (std::fabs(err) < 1e-13) break;
            (err > 0.0 ? hi : lo) = y;
            const double step = err * sigma.eval(y, 0); // Newton: dL/dy = 1/sigma
            double next = y - step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            y = next;
        }
        return y;
    };

    auto mu_fn = [sigma, nu, L_inv](double x, int order) {
        const double y = L_inv(x);
        const double s = sigma.eval(y, 0);
        if (order == 0) return nu.eval(y, 0) / s - 0.5 * sigma.eval(y, 1);
        // d/dx = sigma(y) d/dy along y = L^{-1}(x)
        const double s1 = sigma.eval(y, 1);
        const double ratio1 = (nu.eval(y, 1) * s - nu.eval(y, 0) * s1) / (s * s);
        return (ratio1 - 0.5 * sigma.eval(y, 2)) * s;
    };

    LampertiResult out;
    out.drift = DriftModel(ScalarField::custom(mu_fn));
    out.L = L;
    out.L_inv = L_inv;
    return out;
}

} // namespace hm
