#pragma once

#include <stdexcept>
#include <string>

namespace svdclass {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, flags, or configuration values.
struct ConfigError : Error {
    using Error::Error;
};

/// Problems with input data: unreadable directories, empty classes, mismatched sizes.
struct DataError : Error {
    using Error::Error;
};

/// A recognised image stream that could not be decoded.
struct DecodeError : DataError {
    using DataError::DataError;
};

/// Bytes that do not start with a JPEG, PNG, or binary PGM signature.
struct UnsupportedFormatError : DataError {
    using DataError::DataError;
};

/// The template-weight solver stopped at its iteration cap without meeting
/// the KKT tolerance.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual(residual) {}
    double residual;
};

}  // namespace svdclass
