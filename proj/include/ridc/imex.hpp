#pragma once

// Semi-implicit one-step integrators: forward-backward Euler and coupled
// DIRK/explicit (additive) Runge-Kutta pairs.

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ridc/errors.hpp"
#include "ridc/ivp.hpp"
#include "ridc/linalg.hpp"

namespace ridc {

struct NewtonSettings {
  double tolerance = 1e-12;  // on ||residual||_inf, scaled by (1 + ||rhs||_inf)
  int max_iterations = 25;
};

/// Solves the implicit relation y - gamma * f_stiff(t, y) = rhs that every
/// stepper in this library reduces to.
///
/// Linear stiff terms go through a cache of QR factorizations of
/// (I - gamma * L) keyed by (operator, gamma). The cache is safe for
/// concurrent use: lookups take a shared lock, inserts an exclusive one.
/// Call prefactor() before timing or parallel runs so workers never insert.
class ImplicitSolver {
 public:
  explicit ImplicitSolver(NewtonSettings newton = {}, bool force_newton = false)
      : newton_(newton), force_newton_(force_newton) {}

  ImplicitSolver(const ImplicitSolver&) = delete;
  ImplicitSolver& operator=(const ImplicitSolver&) = delete;

  const NewtonSettings& newton() const noexcept { return newton_; }
  bool uses_linear_path(const SplitIvp& ivp) const noexcept {
    return ivp.has_linear_stiff() && !force_newton_;
  }

  std::shared_ptr<const QrFactorization> factorization(const SplitIvp& ivp, double gamma) const {
    const DenseMatrix* op = ivp.stiff_operator();
    if (op == nullptr) throw ContractViolation("factorization: problem has no linear stiff operator");
    const Key key{op, gamma};
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto f = std::make_shared<const QrFactorization>(qr_factor(system_matrix(*op, gamma)));
    std::unique_lock lock(mutex_);
    return cache_.emplace(key, std::move(f)).first->second;
  }

  void prefactor(const SplitIvp& ivp, double gamma) const {
    if (uses_linear_path(ivp)) (void)factorization(ivp, gamma);
  }

  std::size_t cached_factorizations() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

  StateVector solve(const SplitIvp& ivp, double t, double gamma, std::span<const double> rhs) const {
    ivp.check_dimension(rhs);
    if (uses_linear_path(ivp)) return qr_solve(*factorization(ivp, gamma), rhs);
    return newton_solve(ivp, t, gamma, rhs);
  }

 private:
  using Key = std::pair<const DenseMatrix*, double>;

  static DenseMatrix system_matrix(const DenseMatrix& op, double gamma) {
    const std::size_t n = op.rows();
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = (i == j ? 1.0 : 0.0) - gamma * op(i, j);
    return m;
  }

  StateVector newton_solve(const SplitIvp& ivp, double t, double gamma,
                           std::span<const double> rhs) const {
    const std::size_t n = rhs.size();
    const double tol = newton_.tolerance * (1.0 + norm_inf(rhs));
    const double h0 = std::sqrt(std::numeric_limits<double>::epsilon());
    StateVector y(rhs.begin(), rhs.end());

    auto residual = [&](std::span<const double> x, const StateVector& fx) {
      StateVector r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = x[i] - gamma * fx[i] - rhs[i];
      return r;
    };

    StateVector fy = ivp.eval_stiff(t, y);
    StateVector res = residual(y, fy);
    double res_norm = norm_inf(res);
    for (int iter = 0; iter < newton_.max_iterations; ++iter) {
      if (res_norm <= tol) return y;
      DenseMatrix jac(n, n);
      StateVector yp = y;
      for (std::size_t j = 0; j < n; ++j) {
        const double h = h0 * (1.0 + std::abs(y[j]));
        yp[j] = y[j] + h;
        const StateVector fp = ivp.eval_stiff(t, yp);
        yp[j] = y[j];
        for (std::size_t i = 0; i < n; ++i) {
          jac(i, j) = (i == j ? 1.0 : 0.0) - gamma * (fp[i] - fy[i]) / h;
        }
      }
      const StateVector delta = qr_solve(qr_factor(jac), res);
      for (std::size_t i = 0; i < n; ++i) y[i] -= delta[i];
      fy = ivp.eval_stiff(t, y);
      res = residual(y, fy);
      res_norm = norm_inf(res);
    }
    if (res_norm <= tol) return y;
    throw ConvergenceError(newton_.max_iterations, res_norm);
  }

  NewtonSettings newton_;
  bool force_newton_;
  mutable std::shared_mutex mutex_;
  mutable std::map<Key, std::shared_ptr<const QrFactorization>> cache_;
};

/// One forward-backward Euler step when f_nonstiff(t_n, y_n) is already known:
/// (I - dt f_stiff)(y_{n+1}) = y_n + dt * f_nonstiff(t_n, y_n).
inline StateVector fbe_step_from(const SplitIvp& ivp, double t_n, std::span<const double> y_n,
                                 std::span<const double> f_nonstiff_n, double dt,
                                 const ImplicitSolver& solver) {
  if (!(dt > 0.0)) throw ContractViolation("fbe_step: dt must be positive");
  StateVector rhs(y_n.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = y_n[i] + dt * f_nonstiff_n[i];
  return solver.solve(ivp, t_n + dt, dt, rhs);
}

inline StateVector fbe_step(const SplitIvp& ivp, double t_n, std::span<const double> y_n,
                            double dt, const ImplicitSolver& solver) {
  if (!all_finite(y_n)) throw ContractViolation("fbe_step: non-finite state");
  const StateVector fn = ivp.eval_nonstiff(t_n, y_n);
  return fbe_step_from(ivp, t_n, y_n, fn, dt, solver);
}

struct Rational {
  long num;
  long den = 1;
  constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

using RationalRow = std::vector<Rational>;

/// Coupled implicit (DIRK) and explicit tableaux of equal stage count.
/// Rows shorter than the stage count are padded with zeros.
class ButcherPair {
 public:
  ButcherPair(std::vector<Rational> c, std::vector<RationalRow> a_implicit,
              std::vector<RationalRow> a_explicit, RationalRow b_implicit, RationalRow b_explicit)
      : stages_(c.size()) {
    const std::size_t s = stages_;
    if (s == 0) throw ContractViolation("ButcherPair: no stages");
    if (a_implicit.size() != s || a_explicit.size() != s || b_implicit.size() > s ||
        b_explicit.size() > s) {
      throw ContractViolation("ButcherPair: tableau shapes disagree with stage count");
    }
    c_.resize(s);
    a_implicit_.assign(s * s, 0.0);
    a_explicit_.assign(s * s, 0.0);
    b_implicit_.assign(s, 0.0);
    b_explicit_.assign(s, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
      c_[i] = c[i].value();
      if (a_implicit[i].size() > s || a_explicit[i].size() > s) {
        throw ContractViolation("ButcherPair: row " + std::to_string(i) + " too long");
      }
      for (std::size_t j = 0; j < a_implicit[i].size(); ++j) {
        if (j > i && a_implicit[i][j].num != 0) {
          throw ContractViolation("ButcherPair: implicit tableau not lower triangular");
        }
        a_implicit_[i * s + j] = a_implicit[i][j].value();
      }
      for (std::size_t j = 0; j < a_explicit[i].size(); ++j) {
        if (j >= i && a_explicit[i][j].num != 0) {
          throw ContractViolation("ButcherPair: explicit tableau not strictly lower triangular");
        }
        a_explicit_[i * s + j] = a_explicit[i][j].value();
      }
    }
    for (std::size_t j = 0; j < b_implicit.size(); ++j) b_implicit_[j] = b_implicit[j].value();
    for (std::size_t j = 0; j < b_explicit.size(); ++j) b_explicit_[j] = b_explicit[j].value();

    for (std::size_t i = 0; i < s; ++i) {
      double si = 0.0, se = 0.0;
      for (std::size_t j = 0; j < s; ++j) {
        si += a_implicit_[i * s + j];
        se += a_explicit_[i * s + j];
      }
      if (std::abs(si - c_[i]) > 1e-14 || std::abs(se - c_[i]) > 1e-14) {
        throw ContractViolation("ButcherPair: row " + std::to_string(i) +
                                " does not sum to its abscissa");
      }
    }
  }

  std::size_t stages() const noexcept { return stages_; }
  double c(std::size_t i) const { return c_[i]; }
  double a_implicit(std::size_t i, std::size_t j) const { return a_implicit_[i * stages_ + j]; }
  double a_explicit(std::size_t i, std::size_t j) const { return a_explicit_[i * stages_ + j]; }
  double b_implicit(std::size_t i) const { return b_implicit_[i]; }
  double b_explicit(std::size_t i) const { return b_explicit_[i]; }

 private:
  std::size_t stages_;
  std::vector<double> c_;
  std::vector<double> a_implicit_;
  std::vector<double> a_explicit_;
  std::vector<double> b_implicit_;
  std::vector<double> b_explicit_;
};

/// Third-order 5-stage pair.
inline ButcherPair imex3_tableau() {
  return ButcherPair(
      {{0}, {1, 2}, {1, 2}, {1}, {1}},
      {{},
       {{0}, {1, 2}},
       {{1, 4}, {-5, 12}, {2, 3}},
       {{2}, {-7, 2}, {1, 2}, {2}},
       {{1, 6}, {0}, {2, 3}, {-5, 6}, {1}}},
      {{},
       {{1, 2}},
       {{1, 4}, {1, 4}},
       {{0}, {1}, {0}},
       {{1, 6}, {0}, {2, 3}, {1, 6}}},
      {{1, 6}, {0}, {2, 3}, {-5, 6}, {1}},
      {{1, 6}, {0}, {2, 3}, {1, 6}, {0}});
}

/// Fourth-order 7-stage pair: DIRK with 1/2 on the diagonal of stages 2-6 and
/// 2/3 on the last, coupled with a 7-stage explicit method.
inline ButcherPair imex4_tableau() {
  return ButcherPair(
      {{0}, {1, 3}, {1, 3}, {1, 2}, {1, 2}, {1}, {1}},
      {{},
       {{-1, 6}, {1, 2}},
       {{1, 6}, {-1, 3}, {1, 2}},
       {{3, 8}, {-3, 8}, {0}, {1, 2}},
       {{1, 8}, {0}, {3, 8}, {-1, 2}, {1, 2}},
       {{-1, 2}, {0}, {3}, {-3}, {1}, {1, 2}},
       {{1, 6}, {0}, {0}, {0}, {2, 3}, {-1, 2}, {2, 3}}},
      {{},
       {{1, 3}},
       {{1, 6}, {1, 6}},
       {{1, 8}, {0}, {3, 8}},
       {{1, 8}, {0}, {3, 8}, {0}},
       {{1, 2}, {0}, {-3, 2}, {0}, {2}},
       {{1, 6}, {0}, {0}, {0}, {2, 3}, {1, 6}}},
      {{1, 6}, {0}, {0}, {0}, {2, 3}, {-1, 2}, {2, 3}},
      {{1, 6}, {0}, {0}, {0}, {2, 3}, {1, 6}, {0}});
}

/// Forward-backward Euler written as a 2-stage pair: the first stage samples
/// f_nonstiff at (t_n, y_n), the second is the backward Euler solve.
inline ButcherPair fbe_tableau() {
  return ButcherPair({{0}, {1}}, {{}, {{0}, {1}}}, {{}, {{1}}}, {{0}, {1}}, {{1}, {0}});
}

struct StageDerivatives {
  std::vector<StateVector> k_stiff;
  std::vector<StateVector> k_nonstiff;
};

struct ArkStepResult {
  StateVector state;
  StageDerivatives stages;
};

inline ArkStepResult ark_step_with_stages(const SplitIvp& ivp, const ButcherPair& tab, double t_n,
                                          std::span<const double> y_n, double dt,
                                          const ImplicitSolver& solver) {
  if (!(dt > 0.0)) throw ContractViolation("ark_step: dt must be positive");
  ivp.check_dimension(y_n);
  const std::size_t s = tab.stages();
  const std::size_t n = y_n.size();
  StageDerivatives k;
  k.k_stiff.reserve(s);
  k.k_nonstiff.reserve(s);

  StateVector stage(n);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t m = 0; m < n; ++m) {
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        acc += tab.a_implicit(i, j) * k.k_stiff[j][m] + tab.a_explicit(i, j) * k.k_nonstiff[j][m];
      }
      stage[m] = y_n[m] + dt * acc;
    }
    const double ti = t_n + tab.c(i) * dt;
    const double aii = tab.a_implicit(i, i);
    if (aii != 0.0) stage = solver.solve(ivp, ti, aii * dt, stage);
    k.k_stiff.push_back(ivp.eval_stiff(ti, stage));
    k.k_nonstiff.push_back(ivp.eval_nonstiff(ti, stage));
  }

  StateVector out(n);
  for (std::size_t m = 0; m < n; ++m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      acc += tab.b_implicit(i) * k.k_stiff[i][m] + tab.b_explicit(i) * k.k_nonstiff[i][m];
    }
    out[m] = y_n[m] + dt * acc;
  }
  return {std::move(out), std::move(k)};
}

inline StateVector ark_step(const SplitIvp& ivp, const ButcherPair& tab, double t_n,
                            std::span<const double> y_n, double dt, const ImplicitSolver& solver) {
  return ark_step_with_stages(ivp, tab, t_n, y_n, dt, solver).state;
}

/// Distinct a_ii * dt values a pair will ask the solver to factor.
inline void prefactor_tableau(const SplitIvp& ivp, const ButcherPair& tab, double dt,
                              const ImplicitSolver& solver) {
  for (std::size_t i = 0; i < tab.stages(); ++i) {
    if (tab.a_implicit(i, i) != 0.0) solver.prefactor(ivp, tab.a_implicit(i, i) * dt);
  }
}

/// Uniform-step march of a one-step scheme from ivp.t_start() to ivp.t_end().
template <class Step>
StateVector march(const SplitIvp& ivp, std::size_t steps, Step&& step) {
  if (steps == 0) throw ContractViolation("march: steps must be positive");
  const double dt = (ivp.t_end() - ivp.t_start()) / static_cast<double>(steps);
  StateVector y = ivp.initial_state();
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = ivp.t_start() + static_cast<double>(n) * dt;
    y = step(t, y, dt);
    if (!all_finite(y)) throw DivergenceError(0, t + dt);
  }
  return y;
}

inline StateVector integrate_fbe(const SplitIvp& ivp, std::size_t steps, const ImplicitSolver& solver) {
  return march(ivp, steps, [&](double t, const StateVector& y, double dt) {
    return fbe_step(ivp, t, y, dt, solver);
  });
}

inline StateVector integrate_ark(const SplitIvp& ivp, const ButcherPair& tab, std::size_t steps,
                                 const ImplicitSolver& solver) {
  return march(ivp, steps, [&](double t, const StateVector& y, double dt) {
    return ark_step(ivp, tab, t, y, dt, solver);
  });
}

}  // namespace ridc
