#pragma once

#include <stdexcept>
#include <string>

namespace graphevo {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or size mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

/// Input outside an operation's documented domain (log of non-positive, division by zero).
struct DomainError : Error {
    using Error::Error;
};

/// Violated API contract (non-scalar backward root, missing gradient, inconsistent term counts).
struct ContractError : Error {
    using Error::Error;
};

/// Problem with an input file or dataset (parse failure, invariant violation).
struct DataError : Error {
    using Error::Error;
};

/// Invalid configuration value.
struct ConfigError : Error {
    using Error::Error;
};

/// Non-finite value where finiteness is required (NaN loss, failed gradient check).
struct NumericError : Error {
    using Error::Error;
};

} // namespace graphevo
