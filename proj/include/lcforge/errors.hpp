#pragma once

#include <stdexcept>
#include <string>

namespace lcforge {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a precondition (bad size, bad option, mismatched rates).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Input bytes do not follow the declared file format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input parses but its content is unusable (NaN samples, negative indices).
class DataError : public Error {
public:
    using Error::Error;
};

/// A level generator was handed a zero-width amplitude range.
class DegenerateRangeError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// Linear algebra broke down (non-positive-definite kernel matrix etc.).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace lcforge
