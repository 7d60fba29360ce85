#pragma once

#include <stdexcept>
#include <string>

namespace vmtl {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or rank mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// API misuse (e.g. backward on a non-scalar root).
struct ContractError : Error {
    using Error::Error;
};

// Degenerate numeric input: zero-variance map, all-positive target, ...
struct ValueError : Error {
    using Error::Error;
};

// A record lacks the annotation a sampler or loss needs.
struct DataError : Error {
    using Error::Error;
};

// Malformed on-disk data; message carries file/line diagnostics.
struct ParseError : Error {
    using Error::Error;
};

// Bad or missing configuration keys.
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (aborts training).
struct NumericError : Error {
    using Error::Error;
};

inline void check_dim(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

} // namespace vmtl
