#pragma once

#include <stdexcept>
#include <string>

namespace fexp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or grid mismatch between tensors/trajectories.
struct DimensionError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Interpolant schedule produced an invalid coefficient (negative radicand,
// vanishing sigma on an integration grid, ...).
struct ScheduleError : Error {
    using Error::Error;
};

// Corrupt or truncated file, bad magic, malformed CSV/config syntax.
struct FormatError : Error {
    using Error::Error;
};

// Numerical failure at runtime: divergence, non-finite state, eigensolver
// sweep budget exhausted.
struct NumericError : Error {
    using Error::Error;
};

// Constrained simplex step left no feasible mass.
struct InfeasibleError : Error {
    using Error::Error;
};

// Inconsistent or incomplete run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace fexp
