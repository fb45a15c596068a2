#pragma once

#include <stdexcept>
#include <string>

namespace singtime {

// Bad numeric argument to a pure operation (eta <= 0, s outside [0,1], ...).
class ParameterError : public std::invalid_argument {
public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// A modelling hypothesis is violated. The message carries the inequality that failed.
class ValidationError : public std::domain_error {
public:
  explicit ValidationError(const std::string& what) : std::domain_error(what) {}
};

// A hard runtime invariant does not hold (divergence, l2 bound, ...).
class InvariantViolation : public std::runtime_error {
public:
  explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

// Malformed config file, missing key, unreadable input file.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace singtime
