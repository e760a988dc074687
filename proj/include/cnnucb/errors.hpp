#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cnnucb {

// Base of every error thrown by the library. The CLI maps ConfigError to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite value produced inside a forward/backward pass.
class NumericError : public Error {
public:
    using Error::Error;
};

class DivergedError : public NumericError {
public:
    DivergedError(std::size_t iteration, const std::string& what)
        : NumericError(what), iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class EmptyHistoryError : public Error {
public:
    using Error::Error;
};

// Normalizing an all-zero context.
class ZeroNormError : public NumericError {
public:
    using NumericError::NumericError;
};

class RankError : public NumericError {
public:
    using NumericError::NumericError;
};

// Dataset parsing.
class FormatError : public Error {
public:
    using Error::Error;
};

class LengthError : public FormatError {
public:
    using FormatError::FormatError;
};

class LabelRangeError : public FormatError {
public:
    using FormatError::FormatError;
};

} // namespace cnnucb
