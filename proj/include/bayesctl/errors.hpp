#pragma once

#include <stdexcept>
#include <string>

namespace bayesctl {

// Bad arguments to a library call (dimension mismatch, non-finite entries,
// non-positive regularization, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A scenario or configuration that parsed but violates a model invariant.
// `field()` names the offending entry, e.g. "prior.beta[0]".
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Failures of the numerics themselves: singular gains, inconsistent
// transitions, states leaving an oracle grid.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularGainError : public NumericalError {
public:
    SingularGainError(int stage, const std::string& what)
        : NumericalError("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}

    int stage() const noexcept { return stage_; }

private:
    int stage_;
};

class InconsistentTransition : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ExtrapolationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace bayesctl
