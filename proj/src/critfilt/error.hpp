#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace critfilt {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (space mismatch, bad sizes).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameter value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during an evaluation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what), index_(static_cast<std::size_t>(-1)) {}
  NumericError(const std::string& what, std::size_t index)
      : Error(what + " (pixel " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Conjugate gradient did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : Error(what + ": relative residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations"),
        residual_(residual),
        iterations_(iterations) {}
  double residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractError(message);
}

}  // namespace critfilt
