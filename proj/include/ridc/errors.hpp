#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ridc {

/// Precondition on an argument (length, range, ordering) did not hold.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run configuration is inconsistent (indivisible steps, too few steps for
/// the pipeline fill, unknown scheme id, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(std::size_t index, double pivot)
      : std::runtime_error("singular matrix: |R(" + std::to_string(index) + "," +
                           std::to_string(index) + ")| = " + std::to_string(pivot)),
        index_(index),
        pivot_(pivot) {}

  std::size_t index() const noexcept { return index_; }
  double pivot() const noexcept { return pivot_; }

 private:
  std::size_t index_;
  double pivot_;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(int iterations, double residual)
      : std::runtime_error("Newton iteration did not converge after " +
                           std::to_string(iterations) +
                           " iterations (residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A step produced NaN or Inf (typically an explicit-term stability limit).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t level, double t)
      : std::runtime_error("level " + std::to_string(level) + " produced a non-finite state at t = " +
                           std::to_string(t)),
        level_(level),
        t_(t) {}

  std::size_t level() const noexcept { return level_; }
  double time() const noexcept { return t_; }

 private:
  std::size_t level_;
  double t_;
};

/// The level pipeline was driven out of protocol: a stencil entry is missing,
/// a slot was overwritten while still needed, or a level stalled.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ridc
