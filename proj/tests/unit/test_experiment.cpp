#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qedlab/error.hpp"
#include "qedlab/experiment.hpp"

using namespace qedlab;

namespace {

std::string small_config(const std::string& extra = "") {
  return R"({
    "experiment_id": "unit",
    "limits": {"lambda": [0.5, 0.5], "mu": [1, 1], "theta": [0.5, 2], "mu_hat": [1, 1],
               "lambda_hat": [0, 0], "c2u": [1, 1], "gamma": 1},
    "cost": {"kind": "power_queue", "coeffs": [1, 1], "powers": [2, 2], "id": "quad"},
    "grid": {"box_halfwidth": 5, "points_per_axis": 41, "simplex_resolution": 10},
    "sweep_n": [16, 36],
    "policies": ["pscp", "nscp1", {"kind": "prio", "order": [2, 1]}],
    "reps": 4,
    "base_seed": 3,
    "x0": [0.5, 0.5],
    "sde": {"dt": 0.004, "reps": 20})" +
         extra + "}";
}

ErrorKind parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a config error");
  return ErrorKind::InvalidArgument;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(small_config());
  CHECK(cfg.limits.k == 2);
  CHECK(cfg.cost.kind == CostKind::PowerQueue);
  CHECK(cfg.cost_id == "quad");
  CHECK(cfg.policies.size() == 3);
  CHECK(cfg.policies[2].order == std::vector<std::size_t>{1, 0});
  CHECK(cfg.grid.points_per_axis == 41);

  std::string bad = small_config();
  bad.replace(bad.find("\"lambda\": [0.5, 0.5]"), 20, "\"lambda\": [0.5, 0.7]");
  CHECK(parse_error(bad) == ErrorKind::BalanceViolation);

  std::string order = small_config();
  order.replace(order.find("[16, 36]"), 8, "[36, 16]");
  CHECK(parse_error(order) == ErrorKind::ConfigError);

  std::string reps = small_config();
  reps.replace(reps.find("\"reps\": 4"), 9, "\"reps\": 1");
  CHECK(parse_error(reps) == ErrorKind::ConfigError);

  std::string cis = small_config();
  const std::string old_cost = R"({"kind": "power_queue", "coeffs": [1, 1], "powers": [2, 2], "id": "quad"})";
  cis.replace(cis.find(old_cost), old_cost.size(), R"({"kind": "customers_in_system", "coeffs": [1, 1]})");
  CHECK(parse_error(cis) == ErrorKind::ConfigError);
  std::string cis_ok = cis;
  cis_ok.replace(cis_ok.find(R"("coeffs": [1, 1]})"), 17, R"("coeffs": [1, 1], "scale": "diffusion"})");
  CHECK(parse_config(cis_ok).cost.kind == CostKind::CustomersInSystem);

  CHECK(parse_error("{ not json") == ErrorKind::ConfigError);
  CHECK(parse_error(small_config(R"(, "policies": ["nope"])")) == ErrorKind::ConfigError);
}

TEST_CASE("csv append safety") {
  const auto path = temp_path("qedlab_unit_append.csv");
  std::filesystem::remove(path);
  { auto out = open_csv_for_append(path, kSweepHeader); }
  { auto out = open_csv_for_append(path, kSweepHeader); }
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1);
  CHECK_THROWS_AS(open_csv_for_append(path, kSimHeader), Error);
  std::filesystem::remove(path);
}

TEST_CASE("solve command") {
  auto cfg = parse_config(small_config());
  std::ostringstream log;
  const auto path = temp_path("qedlab_unit_grid.csv");
  const auto s = cmd_solve(cfg, path, log);
  CHECK(s.grid.stats.converged);
  CHECK(s.residual.max_interior_residual <= 1e-2);
  CHECK(log.str().find("V(0.5,0.5)=") != std::string::npos);
  std::ifstream in(path);
  const auto back = read_value_grid_csv(in);
  CHECK(back.value_at(Vec{0.5, 0.5}) == doctest::Approx(s.grid.value_at(Vec{0.5, 0.5})));
  std::filesystem::remove(path);

  std::string zero = small_config();
  const std::string old_cost = R"({"kind": "power_queue", "coeffs": [1, 1], "powers": [2, 2], "id": "quad"})";
  zero.replace(zero.find(old_cost), old_cost.size(), R"({"kind": "zero"})");
  const auto z = cmd_solve(parse_config(zero), "", log);
  for (double v : z.grid.values()) CHECK(v == 0.0);
}

TEST_CASE("sweep is reproducible and emits V and diffusion rows") {
  const auto cfg = parse_config(small_config());
  std::ostringstream a, b, log;
  const auto r1 = cmd_sweep(cfg, a, log);
  cmd_sweep(cfg, b, log);
  CHECK(a.str() == b.str());
  CHECK(r1.rows.size() == 2 * 3 + 2);
  CHECK(r1.rows.back().n == "grid");
  CHECK(r1.rows[r1.rows.size() - 2].n == "diffusion");
  for (const auto& row : r1.rows) CHECK(row.wc_violations == 0);
  CHECK(a.str().find("unit,16,prio(2,1),quad,0.5;0.5,") != std::string::npos);

  auto empty = cfg;
  empty.sweep_n.clear();
  std::ostringstream e;
  CHECK(cmd_sweep(empty, e, log).rows.empty());
  CHECK(e.str().empty());
}

TEST_CASE("audit command") {
  auto cfg = parse_config(small_config());
  std::ostringstream log;
  const auto lines = cmd_audit(cfg, log);
  for (const auto& l : lines) CHECK_MESSAGE(l.passed, l.name << ": " << l.detail);

  cfg.inject_corrupt_policy = true;
  const auto bad = cmd_audit(cfg, log);
  REQUIRE_FALSE(bad.empty());
  CHECK_FALSE(bad.back().passed);
  CHECK(bad.back().detail.find("PolicyContractViolation") != std::string::npos);
}

TEST_CASE("simulate command") {
  auto cfg = parse_config(small_config());
  cfg.reps = 3;
  std::ostringstream csv, log;
  cmd_simulate(cfg, csv, log);
  std::istringstream in(csv.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 3 * 3);
  CHECK(csv.str().rfind("3,16,pscp,quad,", 0) == 0);
}
