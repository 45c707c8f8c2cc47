#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ridc/bench.hpp"

using namespace ridc;
using namespace ridc::bench;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ridc_test_" + std::to_string(::getpid()) + "_" + name);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RIDC_BENCH_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

StudyConfig small_adv() {
  StudyConfig cfg;
  cfg.dx = 1.0 / 50.0;
  cfg.t_end = 0.5;
  return cfg;
}

}  // namespace

TEST(Parse, Schemes) {
  EXPECT_EQ(parse_scheme("fbe").kind, Scheme::Kind::fbe);
  EXPECT_EQ(parse_scheme("imex4").kind, Scheme::Kind::imex4);
  EXPECT_EQ(parse_scheme("ridc4-fbe").levels, 4u);
  EXPECT_EQ(parse_scheme("ridc-7").levels, 7u);
  EXPECT_THROW(parse_scheme("ridc-1"), ConfigError);
  EXPECT_THROW(parse_scheme("ridc-13"), ConfigError);
  EXPECT_THROW(parse_scheme("ridc-x"), ConfigError);
  EXPECT_THROW(parse_scheme("rk4"), ConfigError);
  EXPECT_THROW(parse_problem("heat"), ConfigError);
  EXPECT_EQ(parse_norm("l2"), Norm::l2);
}

TEST(Config, StepSweepsMustIncrease) {
  StudyConfig cfg;
  EXPECT_EQ(resolved_steps(cfg), (std::vector<std::size_t>{100, 200, 400, 800, 1600}));
  cfg.steps = {200, 100};
  EXPECT_THROW(resolved_steps(cfg), ConfigError);
  cfg.steps = {0};
  EXPECT_THROW(resolved_steps(cfg), ConfigError);
  cfg = {};
  cfg.reference_refinement = 2;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Metrics, ObservedOrder) {
  ResultRow a, b;
  a.steps = 100;
  b.steps = 200;
  a.error_inf = 1e-2;
  b.error_inf = 1.25e-3;
  a.error_l2 = 4e-3;
  b.error_l2 = 1e-3;
  EXPECT_NEAR(*observed_order(a, b, Norm::inf), 3.0, 1e-12);
  EXPECT_NEAR(*observed_order(a, b, Norm::l2), 2.0, 1e-12);
  b.error_inf = std::nan("");
  EXPECT_FALSE(observed_order(a, b, Norm::inf).has_value());
  EXPECT_NEAR(error_l2(StateVector{1.0, 1.0}, StateVector{0.0, 0.0}, 0.5), 1.0, 1e-15);
  EXPECT_EQ(error_inf(StateVector{1.0, -3.0}, StateVector{0.0, 0.0}), 3.0);
}

TEST(Csv, HeaderOnlyForNoRows) {
  const auto path = temp_path("empty.csv");
  emit_csv({}, path.string());
  std::ifstream in(path);
  std::string line, rest;
  std::getline(in, line);
  EXPECT_EQ(line, kCsvHeader);
  EXPECT_FALSE(std::getline(in, rest));
  EXPECT_TRUE(read_csv(path.string()).empty());
  std::filesystem::remove(path);
}

TEST(Csv, RoundTripAndFieldCount) {
  ResultRow a{"ridc4-fbe", 100, 0.04, 1.0 / 3.0, 2.5e-7, 12.25, 2, 1, std::nullopt};
  ResultRow b{"ridc4-fbe", 200, 0.02, 1e-300, std::nextafter(1.0, 2.0), 0.0, 4, 10, 3.999999999999};
  ResultRow c{"fbe", 400, 0.01, std::nan(""), std::nan(""), 1.0, 1, 1, std::nullopt};
  const auto path = temp_path("rows.csv");
  emit_csv({a, b, c}, path.string());

  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8) << line;

  const auto rows = read_csv(path.string());
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& x = i == 0 ? a : b;
    EXPECT_EQ(rows[i].scheme, x.scheme);
    EXPECT_EQ(rows[i].steps, x.steps);
    EXPECT_EQ(rows[i].dt, x.dt);
    EXPECT_EQ(rows[i].error_inf, x.error_inf);
    EXPECT_EQ(rows[i].error_l2, x.error_l2);
    EXPECT_EQ(rows[i].wall_ms, x.wall_ms);
    EXPECT_EQ(rows[i].workers, x.workers);
    EXPECT_EQ(rows[i].restarts, x.restarts);
    EXPECT_EQ(rows[i].observed_order, x.observed_order);
  }
  EXPECT_TRUE(rows[2].failed());
  std::filesystem::remove(path);
}

TEST(Csv, IoErrorsCarryThePath) {
  try {
    emit_csv({}, "/nonexistent-dir/out.csv");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
  }
  EXPECT_THROW(read_csv("/nonexistent-dir/in.csv"), CsvError);
}

TEST(Studies, ConvergenceIsReproducible) {
  StudyConfig cfg = small_adv();
  cfg.steps = {20, 40, 80};
  const auto a = run_convergence(cfg);
  cfg.workers = 2;
  const auto b = run_convergence(cfg);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].error_inf, b[i].error_inf);
    EXPECT_EQ(a[i].error_l2, b[i].error_l2);
  }
  EXPECT_FALSE(a[0].observed_order.has_value());
  EXPECT_GT(*a[2].observed_order, 3.0);
}

TEST(Studies, FailedRunsAreMarked) {
  StudyConfig cfg;
  cfg.problem = ProblemId::burgers;
  cfg.scheme = "fbe";
  cfg.steps = {20, 1000};
  const auto rows = run_convergence(cfg);
  EXPECT_TRUE(rows[0].failed());
  EXPECT_FALSE(rows[1].failed());
}

TEST(Studies, RestartStudyRows) {
  StudyConfig cfg = small_adv();
  cfg.steps = {120};
  const auto rows = run_restart_study(cfg, {1, 2, 3});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].restarts, 3u);
  StudyConfig bad = cfg;
  bad.scheme = "imex3";
  EXPECT_THROW(run_restart_study(bad, {1}), ConfigError);
  EXPECT_THROW(run_restart_study(cfg, {7}), ConfigError);
}

TEST(Studies, SpeedupPassesDeterminismGate) {
  ::setenv("RIDC_AVAILABLE_PARALLELISM", "4", 1);
  StudyConfig cfg = small_adv();
  cfg.steps = {60};
  cfg.repetitions = 1;
  const auto table = run_speedup(cfg, {1, 2, 4});
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[0].speedup, 1.0);
  EXPECT_THROW(run_speedup(cfg, {5}), ConfigError);
  ::setenv("RIDC_AVAILABLE_PARALLELISM", "1", 1);
  EXPECT_THROW(run_speedup(cfg, {2}), ConfigError);
  ::unsetenv("RIDC_AVAILABLE_PARALLELISM");
}

TEST(Cli, ExitCodes) {
  const auto out = temp_path("cli.csv");
  EXPECT_EQ(run_cli("converge --dx 0.02 --t-end 0.5 --steps 20,40 --out " + out.string()), 0);
  EXPECT_EQ(read_csv(out.string()).size(), 2u);
  EXPECT_EQ(run_cli("converge --scheme rk4"), 1);
  EXPECT_EQ(run_cli("converge --steps 40,20"), 1);
  EXPECT_EQ(run_cli("converge --dx 0.02 --t-end 0.5 --steps 20 --out /nonexistent-dir/x.csv"), 1);
  EXPECT_EQ(run_cli("converge --problem burgers --scheme fbe --steps 20,1000"), 2);
  EXPECT_EQ(run_cli(""), 1);

  const auto cfg_path = temp_path("cfg.ini");
  {
    std::ofstream cfg(cfg_path);
    cfg << "scheme=imex3\ndx=0.02\nt-end=0.5\nsteps=[10,20]\n";
  }
  EXPECT_EQ(run_cli("converge --config " + cfg_path.string() + " --scheme fbe --out " + out.string()), 0);
  const auto rows = read_csv(out.string());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].scheme, "fbe");  // flag overrides file
  EXPECT_EQ(rows[1].steps, 20u);
  std::filesystem::remove(out);
  std::filesystem::remove(cfg_path);
}
