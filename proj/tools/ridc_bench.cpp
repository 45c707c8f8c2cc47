// ridc_bench: convergence, restart and speedup studies.
//
//   ridc_bench converge --problem adv-diff --scheme ridc4-fbe --steps 100,200,400 --out conv.csv
//   ridc_bench restarts --steps 4000 --t-end 40 --restarts 1,2,5,10
//   ridc_bench speedup  --paper-scale --steps 2000 --workers 1,2,4
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure,
// 3 determinism-gate failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ridc/bench.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitDeterminism = 3;

void print_rows(const std::vector<ridc::bench::ResultRow>& rows) {
  std::printf("%-10s %8s %12s %12s %12s %10s %4s %4s %8s\n", "scheme", "steps", "dt", "err_inf", "err_l2",
              "wall_ms", "wrk", "rst", "order");
  for (const auto& r : rows) {
    if (r.failed()) {
      std::printf("%-10s %8zu %12.4e %12s %12s %10.2f %4zu %4zu %8s\n", r.scheme.c_str(), r.steps, r.dt,
                  "FAILED", "FAILED", r.wall_ms, r.workers, r.restarts, "");
      continue;
    }
    std::printf("%-10s %8zu %12.4e %12.4e %12.4e %10.2f %4zu %4zu ", r.scheme.c_str(), r.steps, r.dt,
                r.error_inf, r.error_l2, r.wall_ms, r.workers, r.restarts);
    if (r.observed_order) {
      std::printf("%8.3f\n", *r.observed_order);
    } else {
      std::printf("%8s\n", "");
    }
  }
}

int rows_exit_code(const std::vector<ridc::bench::ResultRow>& rows) {
  for (const auto& r : rows)
    if (r.failed()) return kExitSolver;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-in-time RIDC benchmark harness"};
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.fallthrough();
  app.require_subcommand(1);

  ridc::bench::StudyConfig cfg;
  std::string problem = "adv-diff";
  std::string norm = "inf";
  std::vector<std::size_t> workers;
  std::vector<std::size_t> restarts;
  double dx = 0.0;
  double t_end = 0.0;

  app.add_option("--problem", problem, "adv-diff | burgers")->check(CLI::IsMember({"adv-diff", "burgers"}));
  app.add_option("--scheme", cfg.scheme, "fbe | imex3 | imex4 | ridc4-fbe | ridc-p");
  app.add_option("--steps", cfg.steps, "Step counts, strictly increasing (comma separated)")->delimiter(',');
  app.add_option("--workers", workers, "Worker threads (speedup: list of counts)")->delimiter(',');
  app.add_option("--restarts", restarts, "Restart count (restarts: list of counts)")->delimiter(',');
  app.add_option("--dx", dx, "Grid spacing override");
  app.add_option("--t-end", t_end, "Final time override");
  app.add_flag("--paper-scale", cfg.paper_scale, "Use the full-resolution problem (dx = 1/1000)");
  app.add_option("--out", cfg.out, "CSV output path");
  app.add_option("--norm", norm, "Norm for observed orders: inf | l2")->check(CLI::IsMember({"inf", "l2"}));
  app.add_option("--refinement", cfg.reference_refinement, "Reference solution refinement factor (>= 8)");
  app.add_option("--repetitions", cfg.repetitions, "Timed repetitions per speedup row");

  auto* converge = app.add_subcommand("converge", "Error versus step count sweep");
  auto* speedup = app.add_subcommand("speedup", "Wall time and speedup versus worker count");
  auto* restart = app.add_subcommand("restarts", "Error versus restart count at fixed steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    cfg.problem = ridc::bench::parse_problem(problem);
    cfg.norm = ridc::bench::parse_norm(norm);
    if (dx > 0.0) cfg.dx = dx;
    if (t_end > 0.0) cfg.t_end = t_end;

    if (converge->parsed()) {
      if (workers.size() > 1 || restarts.size() > 1) {
        throw ridc::ConfigError("converge takes a single --workers and --restarts value");
      }
      if (!workers.empty()) cfg.workers = workers.front();
      if (!restarts.empty()) cfg.restarts = restarts.front();
      const auto rows = ridc::bench::run_convergence(cfg);
      print_rows(rows);
      if (!cfg.out.empty()) ridc::bench::emit_csv(rows, cfg.out);
      return rows_exit_code(rows);
    }

    if (restart->parsed()) {
      if (workers.size() > 1) throw ridc::ConfigError("restarts takes a single --workers value");
      if (!workers.empty()) cfg.workers = workers.front();
      if (cfg.steps.size() > 1) throw ridc::ConfigError("restarts takes a single --steps value");
      if (cfg.steps.empty()) cfg.steps = {4000};
      if (restarts.empty()) restarts = {1, 2, 5, 10};
      const auto rows = ridc::bench::run_restart_study(cfg, restarts);
      print_rows(rows);
      if (!cfg.out.empty()) ridc::bench::emit_csv(rows, cfg.out);
      return rows_exit_code(rows);
    }

    if (speedup->parsed()) {
      if (restarts.size() > 1) throw ridc::ConfigError("speedup takes a single --restarts value");
      if (!restarts.empty()) cfg.restarts = restarts.front();
      if (cfg.steps.size() > 1) throw ridc::ConfigError("speedup takes a single --steps value");
      if (cfg.steps.empty()) cfg.steps = {2000};
      if (workers.empty()) {
        const auto levels = ridc::bench::parse_scheme(cfg.scheme).levels;
        const auto cores = ridc::bench::available_parallelism();
        for (std::size_t w : {1, 2, 4}) {
          if (w <= levels && w <= cores) workers.push_back(w);
        }
      }
      const auto table = ridc::bench::run_speedup(cfg, workers);
      std::printf("%s, %zu steps, %zu restart(s)\n%8s %12s %8s\n", table.scheme.c_str(), table.steps,
                  table.restarts, "workers", "wall_ms", "speedup");
      for (const auto& r : table.rows) std::printf("%8zu %12.2f %8.2f\n", r.workers, r.wall_ms, r.speedup);
      if (!cfg.out.empty()) ridc::bench::emit_speedup_csv(table, cfg.out);
      return 0;
    }
  } catch (const ridc::bench::DeterminismError& e) {
    std::cerr << "determinism gate failed: " << e.what() << '\n';
    return kExitDeterminism;
  } catch (const ridc::bench::CsvError& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ridc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ridc::ContractViolation& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
  return 0;
}
