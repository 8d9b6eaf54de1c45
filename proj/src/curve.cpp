#include "hm/curve.hpp"

#include <algorithm>
#include <cmath>

#include "hm/errors.hpp"

namespace hm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

struct Curve::Impl {
    virtual ~Impl() = default;
    virtual double eval(double t, int order) const = 0;
};

namespace {

void check_order(int order) {
    if (order < 0 || order > 2) throw DomainError("derivative order must be 0, 1 or 2");
}

struct PolyImpl final : Curve::Impl {
    std::vector<double> c; // c[0] + c[1] t + ...
    explicit PolyImpl(std::vector<double> coeffs) : c(std::move(coeffs)) {
        if (c.empty()) c.push_back(0.0);
    }
    double eval(double t, int order) const override {
        check_order(order);
        double acc = 0.0;
        for (std::size_t k = c.size(); k-- > static_cast<std::size_t>(order);) {
            double factor = 1.0;
            for (int j = 0; j < order; ++j) factor *= static_cast<double>(k - j);
            acc = acc * t + factor * c[k];
        }
        return acc;
    }
};

struct CosineImpl final : Curve::Impl {
    double amp, omega, phase, offset;
    CosineImpl(double a, double f, double p, double o)
        : amp(a), omega(kTwoPi * f), phase(p), offset(o) {}
    double eval(double t, int order) const override {
        check_order(order);
        const double x = omega * t + phase;
        switch (order) {
            case 0: return amp * std::cos(x) + offset;
            case 1: return -amp * omega * std::sin(x);
            default: return -amp * omega * omega * std::cos(x);
        }
    }
};

// Natural cubic spline for g; the g'/g'' tables are interpolated linearly so
// that derivative values stay exactly those the user declared at the nodes.
struct TabulatedImpl final : Curve::Impl {
    std::vector<double> ts, g, dg, ddg, m; // m: spline second derivatives of g

    TabulatedImpl(std::vector<double> t, std::vector<double> g_, std::vector<double> dg_,
                  std::vector<double> ddg_)
        : ts(std::move(t)), g(std::move(g_)), dg(std::move(dg_)), ddg(std::move(ddg_)) {
        const std::size_t n = ts.size();
        if (n < 3 || g.size() != n || dg.size() != n || ddg.size() != n)
            throw ConfigError("curve.tabulated", "tables must share one grid with >= 3 nodes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(ts[i] > ts[i - 1]))
                throw ConfigError("curve.tabulated", "grid must be strictly increasing");
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(g[i]) || !std::isfinite(dg[i]) || !std::isfinite(ddg[i]))
                throw ConfigError("curve.tabulated", "non-finite table entry");
        build_spline();
    }

    void build_spline() {
        const std::size_t n = ts.size();
        m.assign(n, 0.0);
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
        b[0] = b[n - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = ts[i] - ts[i - 1], h1 = ts[i + 1] - ts[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            c[i] = h1 / 6.0;
            d[i] = (g[i + 1] - g[i]) / h1 - (g[i] - g[i - 1]) / h0;
        }
        for (std::size_t i = 1; i < n; ++i) { // Thomas sweep
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        m[n - 1] = d[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
    }

    std::size_t segment(double t) const {
        if (t < ts.front() - 1e-12 || t > ts.back() + 1e-12)
            throw DomainError("tabulated curve queried outside its grid");
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        std::size_t i = static_cast<std::size_t>(it - ts.begin());
        if (i == 0) i = 1;
        if (i >= ts.size()) i = ts.size() - 1;
        return i - 1;
    }

    double eval(double t, int order) const override {
        check_order(order);
        const std::size_t i = segment(t);
        const double h = ts[i + 1] - ts[i];
        if (order == 0) {
            const double u = (ts[i + 1] - t) / h, v = (t - ts[i]) / h;
            return u * g[i] + v * g[i + 1] +
                   ((u * u * u - u) * m[i] + (v * v * v - v) * m[i + 1]) * h * h / 6.0;
        }
        const auto& tab = (order == 1) ? dg : ddg;
        const double v = (t - ts[i]) / h;
        return (1.0 - v) * tab[i] + v * tab[i + 1];
    }
};

struct ReversedImpl final : Curve::Impl {
    Curve base;
    double pivot; // t1 + t2
    ReversedImpl(Curve b, double t1, double t2) : base(std::move(b)), pivot(t1 + t2) {}
    double eval(double t, int order) const override {
        const double v = base.eval(pivot - t, order);
        return (order == 1) ? -v : v;
    }
};

struct AffineImpl final : Curve::Impl {
    Curve base;
    double scale, shift;
    AffineImpl(Curve b, double s, double c) : base(std::move(b)), scale(s), shift(c) {}
    double eval(double t, int order) const override {
        const double v = scale * base.eval(t, order);
        return order == 0 ? v + shift : v;
    }
};

struct SumImpl final : Curve::Impl {
    Curve a, b;
    double sign_b;
    SumImpl(Curve a_, Curve b_, double s) : a(std::move(a_)), b(std::move(b_)), sign_b(s) {}
    double eval(double t, int order) const override {
        return a.eval(t, order) + sign_b * b.eval(t, order);
    }
};

} // namespace

double Curve::eval(double t, int order) const {
    const double v = impl_->eval(t, order);
    if (!std::isfinite(v)) throw NumericError("curve evaluation is not finite");
    return v;
}

#define HM_MAKE(ImplT, ...)                                                            \
    Curve(std::shared_ptr<const Curve::Impl>(std::make_shared<const ImplT>(__VA_ARGS__)))

Curve Curve::constant(double c) { return HM_MAKE(PolyImpl, std::vector<double>{c}); }
Curve Curve::linear(double a, double b) { return HM_MAKE(PolyImpl, std::vector<double>{a, b}); }
Curve Curve::polynomial(std::vector<double> coeffs) { return HM_MAKE(PolyImpl, std::move(coeffs)); }
Curve Curve::cosine(double amplitude, double frequency, double phase, double offset) {
    return HM_MAKE(CosineImpl, amplitude, frequency, phase, offset);
}

Curve Curve::tabulated(std::vector<double> ts, std::vector<double> g, std::vector<double> dg,
                       std::vector<double> ddg, double derivative_tol) {
    Curve c = HM_MAKE(TabulatedImpl, std::move(ts), std::move(g), std::move(dg), std::move(ddg));
    const auto* impl = static_cast<const TabulatedImpl*>(c.impl_.get());
    for (std::size_t i = 1; i + 1 < impl->ts.size(); ++i) {
        const double fd = (impl->g[i + 1] - impl->g[i - 1]) / (impl->ts[i + 1] - impl->ts[i - 1]);
        if (std::fabs(fd - impl->dg[i]) > derivative_tol)
            throw ConfigError("curve.tabulated",
                              "g' table inconsistent with finite differences of g");
    }
    return c;
}

Curve Curve::reversed(double t1, double t2) const { return HM_MAKE(ReversedImpl, *this, t1, t2); }
Curve Curve::shifted(double c) const { return HM_MAKE(AffineImpl, *this, 1.0, c); }
Curve Curve::negated() const { return HM_MAKE(AffineImpl, *this, -1.0, 0.0); }
Curve Curve::scaled(double s) const { return HM_MAKE(AffineImpl, *this, s, 0.0); }

Curve operator-(const Curve& a, const Curve& b) { return HM_MAKE(SumImpl, a, b, -1.0); }
Curve operator+(const Curve& a, const Curve& b) { return HM_MAKE(SumImpl, a, b, 1.0); }

#undef HM_MAKE

std::vector<double> Curve::sample(const TimeGrid& grid, int order) const {
    std::vector<double> out(static_cast<std::size_t>(grid.n_nodes()));
    for (int i = 0; i < grid.n_nodes(); ++i) out[static_cast<std::size_t>(i)] = eval(grid.node(i), order);
    return out;
}

} // namespace hm
