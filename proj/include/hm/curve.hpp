#pragma once

#include <memory>
#include <vector>

#include "hm/grid.hpp"

namespace hm {

/// Twice-differentiable time function g with g, g', g'' evaluable. Immutable
/// value type; cheap to copy and safe to share across threads.
class Curve {
public:
    Curve() : Curve(constant(0.0)) {}

    /// g(t), g'(t) or g''(t) for order 0, 1, 2.
    double eval(double t, int order = 0) const;
    double operator()(double t) const { return eval(t, 0); }

    static Curve constant(double c);
    static Curve linear(double a, double b); // a + b*t
    static Curve polynomial(std::vector<double> coeffs); // c0 + c1 t + c2 t^2 + ...
    static Curve cosine(double amplitude, double frequency, double phase, double offset);
    /// Tabulated g with consistent g', g'' tables on one grid. g is cubic-spline
    /// interpolated, the derivative tables linearly. Throws ConfigError when
    /// |g' - centered difference of g| exceeds derivative_tol on the grid.
    static Curve tabulated(std::vector<double> ts, std::vector<double> g,
                           std::vector<double> dg, std::vector<double> ddg,
                           double derivative_tol = 1e-3);

    // Combinators used by the kernel formulas.
    Curve reversed(double t1, double t2) const; // t -> f(t1 + t2 - t)
    Curve shifted(double c) const;              // f + c
    Curve negated() const;                      // -f
    Curve scaled(double s) const;               // s * f
    friend Curve operator-(const Curve& a, const Curve& b);
    friend Curve operator+(const Curve& a, const Curve& b);

    /// Sample g^(order) at every grid node.
    std::vector<double> sample(const TimeGrid& grid, int order = 0) const;

    struct Impl;

private:
    explicit Curve(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

} // namespace hm
