#pragma once

#include <stdexcept>
#include <string>

namespace mfbose {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad sizes, out-of-range parameters).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An iterative or numerical procedure did not reach its target accuracy.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A computed result failed one of its own quality diagnostics
/// (clipped mass, weight degeneracy, MCMC acceptance, ...).
class DiagnosticError : public Error {
 public:
  using Error::Error;
};

/// A consistency check that can only fail because of a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw PreconditionError(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace detail
}  // namespace mfbose
