#pragma once

#include <stdexcept>
#include <string>

namespace hm {

/// Invalid or inconsistent user configuration. Carries the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Curve or model queried outside its domain.
class DomainError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite state, quadrature failure, or similar numeric breakdown.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Path algebra misuse: non-adjacent intervals, mismatched grids.
class CompositionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rejection sampler ran out of attempts; reports the observed acceptance rate.
class RejectionBudgetError : public std::runtime_error {
public:
    RejectionBudgetError(const std::string& what, double acceptance_rate)
        : std::runtime_error(what), acceptance_rate_(acceptance_rate) {}
    double acceptance_rate() const { return acceptance_rate_; }

private:
    double acceptance_rate_;
};

/// Weight collapse in a particle system or an empty survivor set.
class DegeneracyError : public std::runtime_error {
public:
    explicit DegeneracyError(const std::string& what, std::string component = {})
        : std::runtime_error(component.empty() ? what : component + ": " + what),
          component_(std::move(component)) {}
    const std::string& component() const { return component_; }

private:
    std::string component_;
};

} // namespace hm
