#pragma once

#include <stdexcept>
#include <string>

namespace sct {

/// Base for every error raised by the toolkit. `exit_code()` is the CLI
/// contract: 1 for usage/config problems, 2 for runtime and numeric failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Raised when an internal invariant (monotone descent, error-sinogram
// consistency) is violated.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

} // namespace sct
