#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "hm/corridor.hpp"
#include "hm/curve.hpp"
#include "hm/grid.hpp"

namespace hm {

/// One-dimensional C^1 function of the state, with derivatives where the
/// family allows them. Backs both drifts and diffusion coefficients.
class ScalarField {
public:
    ScalarField() : ScalarField(zero()) {}

    double eval(double x, int order = 0) const;
    double operator()(double x) const { return eval(x, 0); }

    static ScalarField zero();
    static ScalarField constant(double c);
    static ScalarField linear(double a, double b); // a + b*x
    static ScalarField polynomial(std::vector<double> coeffs);
    /// Values of f and f' on a strictly increasing grid; f is spline
    /// interpolated, f' linearly. f'' comes from differences of the f' table.
    static ScalarField tabulated(std::vector<double> xs, std::vector<double> f,
                                 std::vector<double> df, double derivative_tol = 1e-3);
    static ScalarField custom(std::function<double(double, int)> fn);

    bool is_zero() const;
    /// Exact antiderivative from 0 when the family has one.
    bool has_analytic_integral() const;
    double analytic_integral(double y) const;

    struct Impl;

private:
    explicit ScalarField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// Drift mu of a unit-diffusion SDE dX = mu(X) dt + dW.
class DriftModel {
public:
    DriftModel() : mu_(ScalarField::zero()) {}
    explicit DriftModel(ScalarField mu) : mu_(std::move(mu)) {}

    static DriftModel zero() { return DriftModel(ScalarField::zero()); }
    static DriftModel constant(double c) { return DriftModel(ScalarField::constant(c)); }
    static DriftModel linear(double a, double b) { return DriftModel(ScalarField::linear(a, b)); }
    static DriftModel polynomial(std::vector<double> c) {
        return DriftModel(ScalarField::polynomial(std::move(c)));
    }

    double mu(double x) const { return mu_.eval(x, 0); }
    double mu_prime(double x) const { return mu_.eval(x, 1); }
    bool is_zero() const { return mu_.is_zero(); }
    const ScalarField& field() const { return mu_; }

    /// G(y) = integral of mu from 0 to y: analytic for the built-in families,
    /// adaptive quadrature (abs tol 1e-10) otherwise.
    double G(double y) const;

private:
    ScalarField mu_;
};

/// Trapezoidal quadrature of mu'(w) + mu^2(w) along the path grid.
double eval_N(const DriftModel& d, const SamplePath& w);

/// max(0, sup of -(mu' + mu^2)) over [min g- - delta, max g+ + delta],
/// by dense scan plus golden-section refinement around the grid argmax.
double c_mu_bound(const DriftModel& d, const Corridor& k, double delta = 0.5);

/// log of the Cameron-Martin factor
///   Z_g(w) = exp{ g'(t2)w(t2) - g'(t1)w(t1) - int w g'' du - 1/2 int (g')^2 du }
/// with path integrals by trapezoid on the grid.
double log_cameron_martin_Z(const Curve& g, const SamplePath& w);
inline double cameron_martin_Z(const Curve& g, const SamplePath& w) {
    return std::exp(log_cameron_martin_Z(g, w));
}

/// Z~_g(w) := Z_g(w + g), the factor for a path shifted by the curve.
/// Computed by shifting the path node-wise: the defining identity then holds
/// to rounding. The expanded form with +1/2 int (g')^2 agrees up to the
/// trapezoid error of the g-only terms, which vanishes as O(dt^2).
double log_cameron_martin_Z_tilde(const Curve& g, const SamplePath& w);
inline double cameron_martin_Z_tilde(const Curve& g, const SamplePath& w) {
    return std::exp(log_cameron_martin_Z_tilde(g, w));
}

/// dU = nu(U) dt + sigma(U) dW with sigma > 0.
struct SdeModel {
    ScalarField nu;
    ScalarField sigma;
};

/// Unit-diffusion reduction: L(y) = int_0^y du/sigma(u), X = L(U) satisfies
/// dX = mu(X) dt + dW with mu = (nu/sigma - sigma'/2) o L^{-1}.
struct LampertiResult {
    DriftModel drift;
    std::function<double(double)> L;
    std::function<double(double)> L_inv;
};
/// Validates sigma > 0 on [y_min, y_max]; L_inv is solved by a safeguarded
/// Newton iteration on that range.
LampertiResult lamperti_transform(const SdeModel& m, double y_min = -10.0, double y_max = 10.0);

} // namespace hm
