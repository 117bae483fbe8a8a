#pragma once

#include <stdexcept>
#include <string>

namespace sflab {

/// Bad exponents, misaligned times, violated preconditions.
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// NaN samples, non-integrable data, malformed field files.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Missing optional capability (e.g. a drift without a gradient map).
class CapabilityError : public std::runtime_error {
public:
    explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid experiment configuration, detected before any compute.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Advective CFL violation; carries the largest admissible step.
class CflError : public DomainError {
public:
    CflError(const std::string& what, double required_dt)
        : DomainError(what), required_dt(required_dt) {}
    double required_dt;
};

} // namespace sflab
