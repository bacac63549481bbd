#pragma once

#include <stdexcept>
#include <string>

namespace hischro {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Requested accuracy cannot be met on the given grid or quadrature.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// A guaranteed bracket or invariant failed; indicates a bug.
class InternalError : public Error {
public:
    using Error::Error;
};

/// Numerical results contradict each other (e.g. a Hessian of rank zero).
class InconsistencyError : public Error {
public:
    using Error::Error;
};

/// High-frequency mass build-up in a nonlinear run.
class AliasingError : public Error {
public:
    using Error::Error;
};

} // namespace hischro
