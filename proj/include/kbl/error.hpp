#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kbl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A documented precondition does not hold (singular input, bad contour, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A computation ran but could not produce a trustworthy result.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or command line.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised by polynomial extraction when the formal degree exceeds the cap.
class DegreeCapExceeded : public DomainError {
public:
    DegreeCapExceeded(std::uint64_t degree, std::uint64_t cap)
        : DomainError("formal polynomial degree " + std::to_string(degree) +
                      " exceeds cap " + std::to_string(cap)),
          degree_(degree)
    {
    }

    std::uint64_t degree() const noexcept { return degree_; }

private:
    std::uint64_t degree_;
};

} // namespace kbl
