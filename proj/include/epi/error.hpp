#pragma once

#include <stdexcept>
#include <string>

namespace epi {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: kernel specs, profiles, counts, configuration files.
class InputError : public Error {
public:
    using Error::Error;
};

/// A solver or simulator could not deliver a trustworthy result.
class NumericalError : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public InputError {
public:
    using InputError::InputError;
};

class EmptySupport : public InputError {
public:
    using InputError::InputError;
};

class GridMismatch : public InputError {
public:
    using InputError::InputError;
};

class InvalidProfile : public InputError {
public:
    using InputError::InputError;
};

class CountOverflow : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Raised when an event is requested from a state with no infected sites.
class Absorbed : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class StabilityViolation : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class HorizonExceeded : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
public:
    NoConvergence(const std::string& what, double last_residual)
        : NumericalError(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class InconsistentInput : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace epi
