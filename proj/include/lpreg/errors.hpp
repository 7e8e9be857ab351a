#pragma once

#include <stdexcept>
#include <string>

namespace lpreg {

// Second derivative of the loss is unbounded at the evaluation point.
struct SingularityError : std::domain_error {
    explicit SingularityError(const std::string& msg) : std::domain_error(msg) {}
};

// A required (possibly negative) moment does not exist for the given spec.
struct MomentViolation : std::domain_error {
    explicit MomentViolation(const std::string& msg) : std::domain_error(msg) {}
};

// A matrix that must be positive definite is not (or is numerically broken).
struct NonPositiveDefinite : std::runtime_error {
    explicit NonPositiveDefinite(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value encountered inside an iterative computation.
struct NumericalBreakdown : std::runtime_error {
    explicit NumericalBreakdown(const std::string& msg) : std::runtime_error(msg) {}
};

// A Monte Carlo estimate violates a sign/consistency contract beyond noise.
struct EstimatorInconsistency : std::runtime_error {
    explicit EstimatorInconsistency(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (CSV or JSON config); message carries location info.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lpreg
