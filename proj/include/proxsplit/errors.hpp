#pragma once

#include <stdexcept>
#include <string>

namespace proxsplit {

/// Operand sizes do not match what an operator or function expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid solver or problem configuration (step sizes, relaxation, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside an iterative routine. Carries the last residual.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Malformed or unreadable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace proxsplit
