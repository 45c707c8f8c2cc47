#pragma once

// Method-of-lines benchmark problems. Both split off the central-difference
// diffusion as the (linear) stiff term and treat transport explicitly.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridc/errors.hpp"
#include "ridc/imex.hpp"
#include "ridc/ivp.hpp"
#include "ridc/linalg.hpp"

namespace ridc {

/// u_t = c u_x + d u_xx on [0, 1), periodic, u(x, 0) = 2 + sin(2 pi x).
struct AdvectionDiffusionSpec {
  double speed = 0.1;
  double diffusivity = 1e-3;
  double dx = 1.0 / 200.0;
  double t_end = 4.0;

  static AdvectionDiffusionSpec paper_scale() { return {0.1, 1e-3, 1.0 / 1000.0, 40.0}; }
  static AdvectionDiffusionSpec desk_scale() { return {}; }
};

/// u_t + (u^2 / 2)_x = eps u_xx on [0, 1], u(0) = u(1) = 0,
/// u(x, 0) = sin(2 pi x) + sin(pi x) / 2.
struct BurgersSpec {
  double viscosity = 1e-3;
  double dx = 1.0 / 200.0;
  double t_end = 1.0;

  static BurgersSpec paper_scale() { return {1e-3, 1.0 / 1000.0, 1.0}; }
  static BurgersSpec desk_scale() { return {}; }
};

struct MolProblem {
  SplitIvp ivp;
  std::vector<double> x;                      // grid points of the unknowns
  double dx;
  DenseMatrix diffusion;                      // D, the stiff operator
  std::optional<DenseMatrix> advection;       // A, when transport is linear
};

namespace detail {

inline std::size_t grid_cells(double dx) {
  if (!(dx > 0.0) || dx > 0.5) throw ContractViolation("grid spacing must be in (0, 0.5]");
  const double m = std::round(1.0 / dx);
  if (std::abs(m * dx - 1.0) > 1e-12) {
    throw ContractViolation("grid spacing " + std::to_string(dx) + " does not divide [0, 1]");
  }
  return static_cast<std::size_t>(m);
}

}  // namespace detail

inline MolProblem build_advection_diffusion(const AdvectionDiffusionSpec& spec) {
  if (!(spec.speed > 0.0) || !(spec.diffusivity > 0.0)) {
    throw ContractViolation("advection-diffusion: speed and diffusivity must be positive");
  }
  if (!(spec.t_end > 0.0)) throw ContractViolation("advection-diffusion: t_end must be positive");
  const std::size_t m = detail::grid_cells(spec.dx);
  const double dx = 1.0 / static_cast<double>(m);
  const double a = spec.speed / dx;                 // forward (upwind for c > 0)
  const double d = spec.diffusivity / (dx * dx);

  DenseMatrix adv(m, m);
  DenseMatrix dif(m, m);
  std::vector<double> x(m);
  StateVector u0(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t ip = (i + 1) % m;
    const std::size_t im = (i + m - 1) % m;
    adv(i, i) = -a;
    adv(i, ip) = a;
    dif(i, im) = d;
    dif(i, i) = -2.0 * d;
    dif(i, ip) = d;
    x[i] = static_cast<double>(i) * dx;
    u0[i] = 2.0 + std::sin(2.0 * std::numbers::pi * x[i]);
  }

  RhsFunction stiff = [m, d](double, std::span<const double> u) {
    StateVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double up = u[(i + 1) % m];
      const double um = u[(i + m - 1) % m];
      out[i] = d * um - 2.0 * d * u[i] + d * up;
    }
    return out;
  };
  RhsFunction nonstiff = [m, a](double, std::span<const double> u) {
    StateVector out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = a * u[(i + 1) % m] - a * u[i];
    return out;
  };

  SplitIvp ivp(0.0, spec.t_end, std::move(u0), std::move(stiff), std::move(nonstiff), dif);
  return {std::move(ivp), std::move(x), dx, std::move(dif), std::move(adv)};
}

/// Exact solution of the semi-discrete periodic system: the sine mode is an
/// eigenvector of both circulant operators.
inline StateVector advection_diffusion_exact(const AdvectionDiffusionSpec& spec, double t) {
  const std::size_t m = detail::grid_cells(spec.dx);
  const double dx = 1.0 / static_cast<double>(m);
  const double theta = 2.0 * std::numbers::pi * dx;
  const double re = spec.speed / dx * (std::cos(theta) - 1.0) +
                    2.0 * spec.diffusivity * (std::cos(theta) - 1.0) / (dx * dx);
  const double im = spec.speed / dx * std::sin(theta);
  StateVector u(m);
  for (std::size_t i = 0; i < m; ++i) {
    u[i] = 2.0 + std::exp(re * t) * std::sin(theta * static_cast<double>(i) + im * t);
  }
  return u;
}

inline MolProblem build_burgers(const BurgersSpec& spec) {
  if (!(spec.viscosity > 0.0)) throw ContractViolation("burgers: viscosity must be positive");
  if (!(spec.t_end > 0.0)) throw ContractViolation("burgers: t_end must be positive");
  const std::size_t cells = detail::grid_cells(spec.dx);
  if (cells < 3) throw ContractViolation("burgers: need at least two interior points");
  const std::size_t m = cells - 1;  // interior unknowns u_1 .. u_{M-1}
  const double dx = 1.0 / static_cast<double>(cells);
  const double d = spec.viscosity / (dx * dx);
  const double flux = 1.0 / (4.0 * dx);

  DenseMatrix dif(m, m);
  std::vector<double> x(m);
  StateVector u0(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) dif(i, i - 1) = d;
    dif(i, i) = -2.0 * d;
    if (i + 1 < m) dif(i, i + 1) = d;
    x[i] = static_cast<double>(i + 1) * dx;
    u0[i] = std::sin(2.0 * std::numbers::pi * x[i]) + 0.5 * std::sin(std::numbers::pi * x[i]);
  }

  RhsFunction stiff = [m, d](double, std::span<const double> u) {
    StateVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double um = i > 0 ? u[i - 1] : 0.0;
      const double up = i + 1 < m ? u[i + 1] : 0.0;
      out[i] = d * um - 2.0 * d * u[i] + d * up;
    }
    return out;
  };
  // -(f_{i+1/2} - f_{i-1/2}) / (2 dx) with f_{i+1/2} = (u_{i+1}^2 + u_i^2) / 2.
  RhsFunction nonstiff = [m, flux](double, std::span<const double> u) {
    StateVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double um = i > 0 ? u[i - 1] : 0.0;
      const double up = i + 1 < m ? u[i + 1] : 0.0;
      out[i] = -(up * up - um * um) * flux;
    }
    return out;
  };

  SplitIvp ivp(0.0, spec.t_end, std::move(u0), std::move(stiff), std::move(nonstiff), dif);
  return {std::move(ivp), std::move(x), dx, std::move(dif), std::nullopt};
}

/// Minimum reference refinement over the finest study resolution.
inline constexpr std::size_t kMinReferenceRefinement = 8;

/// Fine IMEX4 solution at t_end, using finest_steps * refinement steps
/// (scaled to the window [t_start, t_end]).
inline StateVector reference_solution(const SplitIvp& ivp, double t_end, std::size_t finest_steps,
                                      std::size_t refinement, const ImplicitSolver& solver) {
  if (refinement < kMinReferenceRefinement) {
    throw ContractViolation("reference_solution: refinement must be >= " +
                            std::to_string(kMinReferenceRefinement));
  }
  if (finest_steps == 0) throw ContractViolation("reference_solution: finest_steps must be positive");
  if (t_end == ivp.t_start()) return ivp.initial_state();
  const SplitIvp window = ivp.with_window(ivp.t_start(), t_end, ivp.initial_state());
  const auto tab = imex4_tableau();
  const std::size_t steps = finest_steps * refinement;
  prefactor_tableau(window, tab, (t_end - ivp.t_start()) / static_cast<double>(steps), solver);
  return integrate_ark(window, tab, steps, solver);
}

/// Grid location of the steepest descent (most negative forward difference).
inline double steepest_descent_location(std::span<const double> u, std::span<const double> x) {
  if (u.size() != x.size() || u.size() < 2) throw ContractViolation("steepest_descent_location: bad sizes");
  std::size_t best = 0;
  double slope = u[1] - u[0];
  for (std::size_t i = 1; i + 1 < u.size(); ++i) {
    const double s = u[i + 1] - u[i];
    if (s < slope) {
      slope = s;
      best = i;
    }
  }
  return 0.5 * (x[best] + x[best + 1]);
}

inline double max_abs_slope(std::span<const double> u, double dx) {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) m = std::max(m, std::abs(u[i + 1] - u[i]) / dx);
  return m;
}

}  // namespace ridc
