#pragma once

#include <stdexcept>
#include <string>

namespace ecgnn {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (messages name both shapes).
struct ShapeError : Error {
    using Error::Error;
};

// Caller-supplied data is invalid (empty sequence, out-of-range answer, ...).
struct InputError : Error {
    using Error::Error;
};

// Bad configuration value (unknown activation kind, inconsistent dims, ...).
struct ConfigError : Error {
    using Error::Error;
};

// An API contract was violated (e.g. backward() on a non-scalar).
struct ContractError : Error {
    using Error::Error;
};

// Malformed file on disk (bad magic, truncated payload, dim overflow).
struct FormatError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss, ...).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace ecgnn
