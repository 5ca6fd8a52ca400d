#pragma once

#include <stdexcept>
#include <string>

namespace sgid {

/// Violated precondition on user-supplied input (negative parameter,
/// malformed grid, bad flag combination). Maps to CLI exit code 2.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to produce a trustworthy answer.
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}

  /// Last residual, step size or condition number, depending on the source.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace sgid
