#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "ridc/errors.hpp"
#include "ridc/linalg.hpp"

namespace ridc {

/// Right-hand side term f(t, y). Must be pure and reentrant: workers call it
/// concurrently and the pipeline relies on replaying it bit-for-bit.
using RhsFunction = std::function<StateVector(double t, std::span<const double> y)>;

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// y'(t) = f_stiff(t, y) + f_nonstiff(t, y), y(t_start) = initial_state.
///
/// When `stiff_operator` is set, f_stiff(t, y) == L y for a constant L and the
/// steppers take the pre-factored linear path instead of Newton.
class SplitIvp {
 public:
  SplitIvp(double t_start, double t_end, StateVector initial_state, RhsFunction stiff,
           RhsFunction nonstiff, std::optional<DenseMatrix> stiff_operator = std::nullopt)
      : t_start_(t_start),
        t_end_(t_end),
        initial_state_(std::move(initial_state)),
        stiff_(std::move(stiff)),
        nonstiff_(std::move(nonstiff)) {
    if (!(t_start < t_end)) throw ContractViolation("SplitIvp: requires t_start < t_end");
    if (initial_state_.empty()) throw ContractViolation("SplitIvp: empty initial state");
    if (!all_finite(initial_state_)) throw ContractViolation("SplitIvp: non-finite initial state");
    if (!stiff_ || !nonstiff_) throw ContractViolation("SplitIvp: both splits are required");
    if (stiff_operator) {
      if (stiff_operator->rows() != dimension() || stiff_operator->cols() != dimension()) {
        throw ContractViolation("SplitIvp: stiff operator must be " +
                                std::to_string(dimension()) + "x" + std::to_string(dimension()));
      }
      stiff_operator_ = std::make_shared<const DenseMatrix>(std::move(*stiff_operator));
    }
  }

  std::size_t dimension() const noexcept { return initial_state_.size(); }
  double t_start() const noexcept { return t_start_; }
  double t_end() const noexcept { return t_end_; }
  const StateVector& initial_state() const noexcept { return initial_state_; }

  bool has_linear_stiff() const noexcept { return stiff_operator_ != nullptr; }
  const DenseMatrix* stiff_operator() const noexcept { return stiff_operator_.get(); }

  StateVector eval_stiff(double t, std::span<const double> y) const {
    check_dimension(y);
    return stiff_(t, y);
  }

  StateVector eval_nonstiff(double t, std::span<const double> y) const {
    check_dimension(y);
    return nonstiff_(t, y);
  }

  /// Same problem on a different time window and initial state; restarts use it.
  SplitIvp with_window(double t_start, double t_end, StateVector initial_state) const {
    SplitIvp copy = *this;
    if (!(t_start < t_end)) throw ContractViolation("SplitIvp: requires t_start < t_end");
    if (initial_state.size() != dimension()) {
      throw ContractViolation("SplitIvp: initial state has wrong dimension");
    }
    copy.t_start_ = t_start;
    copy.t_end_ = t_end;
    copy.initial_state_ = std::move(initial_state);
    return copy;
  }

  void check_dimension(std::span<const double> y) const {
    if (y.size() != dimension()) {
      throw ContractViolation("state has length " + std::to_string(y.size()) +
                              ", problem dimension is " + std::to_string(dimension()));
    }
  }

 private:
  double t_start_;
  double t_end_;
  StateVector initial_state_;
  RhsFunction stiff_;
  RhsFunction nonstiff_;
  std::shared_ptr<const DenseMatrix> stiff_operator_;
};

inline StateVector eval_full_rhs(const SplitIvp& ivp, double t, std::span<const double> y) {
  StateVector out = ivp.eval_stiff(t, y);
  const StateVector fn = ivp.eval_nonstiff(t, y);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += fn[i];
  return out;
}

}  // namespace ridc
