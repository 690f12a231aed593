#pragma once

#include <stdexcept>
#include <string>

namespace multilink {

/// Base class for all multilink errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A requested problem size exceeds a hard or configured limit.
class SizeLimitError : public Error {
public:
    using Error::Error;
};

/// Operands live over different ground sets (mismatched K).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (bad field declaration, missing key, out-of-range value).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data.
class InputError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (degenerate likelihood, infeasible initialization).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Assignment/truth records cannot be matched up during scoring.
class ScoringError : public Error {
public:
    using Error::Error;
};

} // namespace multilink
