#pragma once

// Integration weights for the deferred-correction integral over one uniform
// step [t_n, t_{n+1}], built from j+1 equispaced stencil nodes.
//
// Steady regime (n >= j-1): trailing stencil t_{n+1}, t_n, ..., t_{n+1-j};
//   weight k belongs to node t_{n+1-k} (newest first).
// Startup regime (n < j-1): left-anchored stencil t_0, ..., t_j;
//   weight k belongs to node t_k (oldest first).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ridc/errors.hpp"
#include "ridc/linalg.hpp"

namespace ridc {

enum class StencilRegime { steady, startup };

struct QuadratureWeights {
  std::size_t level = 0;
  StencilRegime regime = StencilRegime::steady;
  std::size_t step = 0;  // n; only meaningful for the startup regime
  std::vector<double> weights;
};

inline constexpr std::size_t kMaxCorrectionLevel = 11;

namespace detail {

// Integral over s in [0, 1] of the Lagrange basis polynomial for nodes[k]
// (s = (t - t_n) / dt), by expanding the numerator in monomials.
inline double lagrange_unit_integral(std::span<const double> nodes, std::size_t k) {
  std::vector<double> poly{1.0};  // coefficients, lowest degree first
  double denom = 1.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i == k) continue;
    std::vector<double> next(poly.size() + 1, 0.0);
    for (std::size_t d = 0; d < poly.size(); ++d) {
      next[d + 1] += poly[d];
      next[d] -= nodes[i] * poly[d];
    }
    poly = std::move(next);
    denom *= nodes[k] - nodes[i];
  }
  double integral = 0.0;
  for (std::size_t d = 0; d < poly.size(); ++d) integral += poly[d] / static_cast<double>(d + 1);
  return integral / denom;
}

inline QuadratureWeights make_weights(std::size_t j, StencilRegime regime, std::size_t n,
                                      std::span<const double> unit_nodes, double dt) {
  QuadratureWeights w{j, regime, n, {}};
  w.weights.reserve(j + 1);
  for (std::size_t k = 0; k <= j; ++k) w.weights.push_back(dt * lagrange_unit_integral(unit_nodes, k));
  return w;
}

inline void check_level(std::size_t j, double dt, const char* who) {
  if (j == 0) throw ContractViolation(std::string(who) + ": level must be >= 1");
  if (j > kMaxCorrectionLevel) {
    throw ContractViolation(std::string(who) + ": level above " +
                            std::to_string(kMaxCorrectionLevel) + " is not supported");
  }
  if (!(dt > 0.0)) throw ContractViolation(std::string(who) + ": dt must be positive");
}

}  // namespace detail

inline QuadratureWeights steady_weights(std::size_t j, double dt) {
  detail::check_level(j, dt, "steady_weights");
  std::vector<double> nodes(j + 1);
  for (std::size_t k = 0; k <= j; ++k) nodes[k] = 1.0 - static_cast<double>(k);
  return detail::make_weights(j, StencilRegime::steady, 0, nodes, dt);
}

inline QuadratureWeights startup_weights(std::size_t j, std::size_t n, double dt) {
  detail::check_level(j, dt, "startup_weights");
  if (n + 1 >= j) {
    throw ContractViolation("startup_weights: step " + std::to_string(n) +
                            " is in the steady regime for level " + std::to_string(j));
  }
  std::vector<double> nodes(j + 1);
  for (std::size_t k = 0; k <= j; ++k) nodes[k] = static_cast<double>(k) - static_cast<double>(n);
  return detail::make_weights(j, StencilRegime::startup, n, nodes, dt);
}

/// Weights for level j at step n, whichever regime applies.
inline QuadratureWeights weights_for_step(std::size_t j, std::size_t n, double dt) {
  return n + 1 < j ? startup_weights(j, n, dt) : steady_weights(j, dt);
}

/// Sum_k w_k * window[k]; the window must follow the regime's node ordering.
template <class Vec>
StateVector apply_quadrature(const QuadratureWeights& w, std::span<const Vec> window) {
  if (window.size() != w.weights.size()) {
    throw ContractViolation("apply_quadrature: window has " + std::to_string(window.size()) +
                            " entries, weights have " + std::to_string(w.weights.size()));
  }
  const std::size_t n = window.front().size();
  StateVector out(n, 0.0);
  for (std::size_t k = 0; k < window.size(); ++k) {
    if (window[k].size() != n) throw ContractViolation("apply_quadrature: ragged window");
    const double wk = w.weights[k];
    for (std::size_t i = 0; i < n; ++i) out[i] += wk * window[k][i];
  }
  return out;
}

inline StateVector apply_quadrature(const QuadratureWeights& w, const std::vector<StateVector>& window) {
  return apply_quadrature<StateVector>(w, std::span<const StateVector>(window));
}

/// All weight tables a run of `levels` levels needs, computed once up front.
class QuadratureTable {
 public:
  QuadratureTable(std::size_t levels, double dt) {
    steady_.resize(levels);
    startup_.resize(levels);
    for (std::size_t j = 1; j < levels; ++j) {
      steady_[j] = steady_weights(j, dt);
      for (std::size_t n = 0; n + 1 < j; ++n) startup_[j].push_back(startup_weights(j, n, dt));
    }
  }

  const QuadratureWeights& at(std::size_t j, std::size_t n) const {
    return n + 1 < j ? startup_.at(j).at(n) : steady_.at(j);
  }

 private:
  std::vector<QuadratureWeights> steady_;
  std::vector<std::vector<QuadratureWeights>> startup_;
};

}  // namespace ridc
