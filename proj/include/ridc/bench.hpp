#pragma once

// Convergence, restart and strong-scaling studies over the method-of-lines
// problems, plus the CSV result format they share.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ridc/errors.hpp"
#include "ridc/imex.hpp"
#include "ridc/mol.hpp"
#include "ridc/ridc.hpp"

namespace ridc::bench {

/// Outputs differ across worker counts (or from the serial executor).
class DeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV files that cannot be opened, written or parsed.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemId { advection_diffusion, burgers };
enum class Norm { inf, l2 };

inline ProblemId parse_problem(std::string_view s) {
  if (s == "adv-diff") return ProblemId::advection_diffusion;
  if (s == "burgers") return ProblemId::burgers;
  throw ConfigError("unknown problem '" + std::string(s) + "' (expected adv-diff or burgers)");
}

inline std::string to_string(ProblemId p) {
  return p == ProblemId::advection_diffusion ? "adv-diff" : "burgers";
}

inline Norm parse_norm(std::string_view s) {
  if (s == "inf") return Norm::inf;
  if (s == "l2") return Norm::l2;
  throw ConfigError("unknown norm '" + std::string(s) + "' (expected inf or l2)");
}

struct Scheme {
  enum class Kind { fbe, imex3, imex4, ridc } kind = Kind::fbe;
  std::size_t levels = 1;  // ridc only

  bool is_ridc() const noexcept { return kind == Kind::ridc; }
};

/// fbe | imex3 | imex4 | ridc4-fbe | ridc-p (p = 2..12)
inline Scheme parse_scheme(std::string_view s) {
  if (s == "fbe") return {Scheme::Kind::fbe, 1};
  if (s == "imex3") return {Scheme::Kind::imex3, 1};
  if (s == "imex4") return {Scheme::Kind::imex4, 1};
  if (s == "ridc4-fbe") return {Scheme::Kind::ridc, 4};
  if (s.starts_with("ridc-")) {
    const std::string digits(s.substr(5));
    if (!digits.empty() && digits.size() <= 2 &&
        std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto p = static_cast<std::size_t>(std::stoul(digits));
      if (p >= 2 && p <= kMaxLevels) return {Scheme::Kind::ridc, p};
    }
  }
  throw ConfigError("unknown scheme '" + std::string(s) + "' (expected fbe, imex3, imex4, ridc4-fbe or ridc-p, p = 2..12)");
}

/// Available hardware threads; RIDC_AVAILABLE_PARALLELISM overrides it.
inline std::size_t available_parallelism() {
  if (const char* env = std::getenv("RIDC_AVAILABLE_PARALLELISM")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("RIDC_AVAILABLE_PARALLELISM must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct StudyConfig {
  ProblemId problem = ProblemId::advection_diffusion;
  std::string scheme = "ridc4-fbe";
  std::vector<std::size_t> steps;  // empty: the problem's default sweep
  std::size_t workers = 1;
  std::size_t restarts = 1;
  Norm norm = Norm::inf;
  std::string out;
  bool paper_scale = false;
  std::optional<double> dx;
  std::optional<double> t_end;
  std::size_t reference_refinement = kMinReferenceRefinement;
  std::size_t repetitions = 3;  // timed runs per speedup row (median)
};

inline std::vector<std::size_t> default_steps(ProblemId p) {
  if (p == ProblemId::advection_diffusion) return {100, 200, 400, 800, 1600};
  return {800, 1600, 3200, 6400};
}

inline std::vector<std::size_t> resolved_steps(const StudyConfig& cfg) {
  auto steps = cfg.steps.empty() ? default_steps(cfg.problem) : cfg.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] == 0) throw ConfigError("step counts must be positive");
    if (i > 0 && steps[i] <= steps[i - 1]) throw ConfigError("step counts must be strictly increasing");
  }
  return steps;
}

inline void validate(const StudyConfig& cfg) {
  (void)parse_scheme(cfg.scheme);
  (void)resolved_steps(cfg);
  if (cfg.workers == 0) throw ConfigError("workers must be positive");
  if (cfg.restarts == 0) throw ConfigError("restarts must be positive");
  if (cfg.repetitions == 0) throw ConfigError("repetitions must be positive");
  if (cfg.reference_refinement < kMinReferenceRefinement) {
    throw ConfigError("reference refinement must be >= " + std::to_string(kMinReferenceRefinement));
  }
}

inline MolProblem build_problem(const StudyConfig& cfg) {
  if (cfg.problem == ProblemId::advection_diffusion) {
    auto spec = cfg.paper_scale ? AdvectionDiffusionSpec::paper_scale() : AdvectionDiffusionSpec::desk_scale();
    if (cfg.dx) spec.dx = *cfg.dx;
    if (cfg.t_end) spec.t_end = *cfg.t_end;
    return build_advection_diffusion(spec);
  }
  auto spec = cfg.paper_scale ? BurgersSpec::paper_scale() : BurgersSpec::desk_scale();
  if (cfg.dx) spec.dx = *cfg.dx;
  if (cfg.t_end) spec.t_end = *cfg.t_end;
  return build_burgers(spec);
}

struct ResultRow {
  std::string scheme;
  std::size_t steps = 0;
  double dt = 0.0;
  double error_inf = 0.0;  // NaN when the run failed
  double error_l2 = 0.0;
  double wall_ms = 0.0;
  std::size_t workers = 1;
  std::size_t restarts = 1;
  std::optional<double> observed_order;

  bool failed() const { return std::isnan(error_inf); }
};

inline double error_inf(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Grid-weighted discrete 2-norm, sqrt(dx * sum e_i^2).
inline double error_l2(std::span<const double> a, std::span<const double> b, double dx) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(dx * s);
}

/// log(e_prev / e_cur) / log(N_cur / N_prev); log2 of the error ratio when dt halves.
inline std::optional<double> observed_order(const ResultRow& prev, const ResultRow& cur, Norm norm) {
  const double ep = norm == Norm::inf ? prev.error_inf : prev.error_l2;
  const double ec = norm == Norm::inf ? cur.error_inf : cur.error_l2;
  if (prev.failed() || cur.failed() || !(ep > 0.0) || !(ec > 0.0)) return std::nullopt;
  return std::log(ep / ec) / std::log(static_cast<double>(cur.steps) / static_cast<double>(prev.steps));
}

/// Factorizations a scheme will need at this dt; done before the clock starts.
inline void prefactor(const SplitIvp& ivp, const Scheme& scheme, double dt, const ImplicitSolver& solver) {
  switch (scheme.kind) {
    case Scheme::Kind::imex3: prefactor_tableau(ivp, imex3_tableau(), dt, solver); break;
    case Scheme::Kind::imex4: prefactor_tableau(ivp, imex4_tableau(), dt, solver); break;
    default: solver.prefactor(ivp, dt); break;
  }
}

/// Integrates to ivp.t_end() and returns the final state. RIDC runs go
/// through the pipelined executor with `workers` threads.
inline StateVector integrate(const SplitIvp& ivp, const Scheme& scheme, std::size_t steps,
                             std::size_t workers, std::size_t restarts, const ImplicitSolver& solver) {
  switch (scheme.kind) {
    case Scheme::Kind::fbe: return integrate_fbe(ivp, steps, solver);
    case Scheme::Kind::imex3: return integrate_ark(ivp, imex3_tableau(), steps, solver);
    case Scheme::Kind::imex4: return integrate_ark(ivp, imex4_tableau(), steps, solver);
    case Scheme::Kind::ridc: {
      RidcConfig rc;
      rc.levels = scheme.levels;
      rc.steps = steps;
      rc.restarts = restarts;
      rc.workers = std::min(workers, scheme.levels);
      return run_pipelined(ivp, rc, solver).final_state;
    }
  }
  throw ConfigError("unreachable scheme kind");
}

namespace detail {

inline ResultRow timed_row(const MolProblem& prob, const std::string& scheme_name, const Scheme& scheme,
                           std::size_t steps, std::size_t workers, std::size_t restarts,
                           const StateVector& reference, const ImplicitSolver& solver) {
  ResultRow row;
  row.scheme = scheme_name;
  row.steps = steps;
  row.dt = (prob.ivp.t_end() - prob.ivp.t_start()) / static_cast<double>(steps);
  row.workers = scheme.is_ridc() ? std::min(workers, scheme.levels) : 1;
  row.restarts = scheme.is_ridc() ? restarts : 1;
  try {
    prefactor(prob.ivp, scheme, row.dt, solver);
    const auto t0 = std::chrono::steady_clock::now();
    const StateVector y = integrate(prob.ivp, scheme, steps, workers, restarts, solver);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    row.error_inf = error_inf(y, reference);
    row.error_l2 = error_l2(y, reference, prob.dx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    row.error_inf = std::numeric_limits<double>::quiet_NaN();
    row.error_l2 = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

}  // namespace detail

/// Error against a fine IMEX4 reference for each step count, with pairwise
/// observed orders. A failing run marks its row failed; the sweep continues.
inline std::vector<ResultRow> run_convergence(const StudyConfig& cfg) {
  validate(cfg);
  const Scheme scheme = parse_scheme(cfg.scheme);
  const auto steps = resolved_steps(cfg);
  if (scheme.is_ridc()) {
    for (std::size_t n : steps) {
      RidcConfig rc;
      rc.levels = scheme.levels;
      rc.steps = n;
      rc.restarts = cfg.restarts;
      rc.workers = std::min(cfg.workers, scheme.levels);
      validate(rc);
    }
  }
  const MolProblem prob = build_problem(cfg);
  const ImplicitSolver solver;
  const StateVector reference =
      reference_solution(prob.ivp, prob.ivp.t_end(), steps.back(), cfg.reference_refinement, solver);

  std::vector<ResultRow> rows;
  for (std::size_t n : steps) {
    rows.push_back(detail::timed_row(prob, cfg.scheme, scheme, n, cfg.workers, cfg.restarts, reference, solver));
    if (rows.size() > 1) rows.back().observed_order = observed_order(rows[rows.size() - 2], rows.back(), cfg.norm);
  }
  return rows;
}

/// Fixed total steps, one row per restart count; orders are left empty.
inline std::vector<ResultRow> run_restart_study(const StudyConfig& cfg, const std::vector<std::size_t>& restart_counts) {
  validate(cfg);
  const Scheme scheme = parse_scheme(cfg.scheme);
  if (!scheme.is_ridc()) throw ConfigError("restart study needs a ridc scheme, got " + cfg.scheme);
  const std::size_t steps = resolved_steps(cfg).front();
  if (restart_counts.empty()) throw ConfigError("restart study needs at least one restart count");
  for (std::size_t r : restart_counts) {
    RidcConfig rc;
    rc.levels = scheme.levels;
    rc.steps = steps;
    rc.restarts = r;
    rc.workers = std::min(cfg.workers, scheme.levels);
    validate(rc);
  }
  const MolProblem prob = build_problem(cfg);
  const ImplicitSolver solver;
  const StateVector reference =
      reference_solution(prob.ivp, prob.ivp.t_end(), steps, cfg.reference_refinement, solver);

  std::vector<ResultRow> rows;
  for (std::size_t r : restart_counts) {
    rows.push_back(detail::timed_row(prob, cfg.scheme, scheme, steps, cfg.workers, r, reference, solver));
  }
  return rows;
}

struct SpeedupRow {
  std::size_t workers;
  double wall_ms;  // median over repetitions
  double speedup;  // relative to the first worker count
};

struct SpeedupTable {
  std::string scheme;
  std::size_t steps;
  std::size_t restarts;
  std::vector<SpeedupRow> rows;
};

/// Times run_pipelined at each worker count. Every output, and the serial
/// executor's, must agree bit for bit before any timing is reported.
inline SpeedupTable run_speedup(const StudyConfig& cfg, const std::vector<std::size_t>& worker_counts) {
  validate(cfg);
  const Scheme scheme = parse_scheme(cfg.scheme);
  if (!scheme.is_ridc()) throw ConfigError("speedup study needs a ridc scheme, got " + cfg.scheme);
  if (worker_counts.empty()) throw ConfigError("speedup study needs at least one worker count");
  const std::size_t cores = available_parallelism();
  for (std::size_t w : worker_counts) {
    if (w == 0 || w > scheme.levels) {
      throw ConfigError("worker count " + std::to_string(w) + " outside 1.." + std::to_string(scheme.levels));
    }
    if (w > cores) {
      throw ConfigError("worker count " + std::to_string(w) + " exceeds available parallelism (" +
                        std::to_string(cores) + ")");
    }
  }
  RidcConfig rc;
  rc.levels = scheme.levels;
  rc.steps = resolved_steps(cfg).front();
  rc.restarts = cfg.restarts;
  validate(rc);

  const MolProblem prob = build_problem(cfg);
  const ImplicitSolver solver;
  solver.prefactor(prob.ivp, (prob.ivp.t_end() - prob.ivp.t_start()) / static_cast<double>(rc.steps));
  const StateVector serial = run_serial(prob.ivp, rc, solver).final_state;

  SpeedupTable table{cfg.scheme, rc.steps, rc.restarts, {}};
  for (std::size_t w : worker_counts) {
    rc.workers = w;
    std::vector<double> times;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const RidcSolution sol = run_pipelined(prob.ivp, rc, solver);
      if (sol.final_state != serial) {
        throw DeterminismError("pipelined output with " + std::to_string(w) +
                               " workers differs from the serial executor");
      }
      times.push_back(sol.wall_seconds * 1e3);
    }
    std::sort(times.begin(), times.end());
    table.rows.push_back({w, times[times.size() / 2], 0.0});
  }
  for (auto& row : table.rows) row.speedup = table.rows.front().wall_ms / row.wall_ms;
  return table;
}

inline constexpr std::string_view kCsvHeader = "scheme,steps,dt,error_inf,error_l2,wall_ms,workers,restarts,observed_order";

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline std::string format_csv_row(const ResultRow& r) {
  std::string s = r.scheme;
  s += ',' + std::to_string(r.steps);
  s += ',' + detail::format_double(r.dt);
  s += ',' + detail::format_double(r.error_inf);
  s += ',' + detail::format_double(r.error_l2);
  s += ',' + detail::format_double(r.wall_ms);
  s += ',' + std::to_string(r.workers);
  s += ',' + std::to_string(r.restarts);
  s += ',' + (r.observed_order ? detail::format_double(*r.observed_order) : std::string());
  return s;
}

inline void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CsvError("cannot open '" + path + "' for writing");
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << format_csv_row(r) << '\n';
  out.flush();
  if (!out) throw CsvError("write to '" + path + "' failed");
}

inline std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw CsvError("'" + path + "': missing or unexpected CSV header");
  }
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 9) {
      throw CsvError("'" + path + "' line " + std::to_string(lineno) + ": expected 9 fields, got " +
                               std::to_string(f.size()));
    }
    try {
      ResultRow r;
      r.scheme = f[0];
      r.steps = std::stoul(f[1]);
      r.dt = detail::parse_double(f[2]);
      r.error_inf = detail::parse_double(f[3]);
      r.error_l2 = detail::parse_double(f[4]);
      r.wall_ms = detail::parse_double(f[5]);
      r.workers = std::stoul(f[6]);
      r.restarts = std::stoul(f[7]);
      if (!f[8].empty()) r.observed_order = detail::parse_double(f[8]);
      rows.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw CsvError("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline void emit_speedup_csv(const SpeedupTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CsvError("cannot open '" + path + "' for writing");
  out << "scheme,steps,restarts,workers,wall_ms,speedup\n";
  for (const auto& r : table.rows) {
    out << table.scheme << ',' << table.steps << ',' << table.restarts << ',' << r.workers << ','
        << detail::format_double(r.wall_ms) << ',' << detail::format_double(r.speedup) << '\n';
  }
  if (!out) throw CsvError("write to '" + path + "' failed");
}

}  // namespace ridc::bench
