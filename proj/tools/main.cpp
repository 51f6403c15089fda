#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "qedlab/error.hpp"
#include "qedlab/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
};

qedlab::ExperimentConfig load(const Options& o) {
  auto cfg = qedlab::load_config(o.config);
  if (o.seed) cfg.base_seed = *o.seed;
  if (o.reps) {
    if (*o.reps < 2) throw qedlab::Error(qedlab::ErrorKind::ConfigError, "--reps must be >= 2");
    cfg.reps = *o.reps;
  }
  return cfg;
}

int exit_code_for(qedlab::ErrorKind kind) {
  using qedlab::ErrorKind;
  switch (kind) {
    case ErrorKind::BalanceViolation:
    case ErrorKind::NonPositiveRate:
    case ErrorKind::NegativeAbandonment:
    case ErrorKind::RateUnderflow:
    case ErrorKind::ConfigError:
    case ErrorKind::UnsupportedSpec:
    case ErrorKind::InvalidArgument:
      return 2;
    default:
      return 1;
  }
}

void add_common(CLI::App* sub, Options& o, bool with_out) {
  sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "override base seed");
  sub->add_option("--reps", o.reps, "override replications per cell");
  if (with_out) sub->add_option("--out", o.out, "output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qedlab: many-server queue control in the Halfin-Whitt regime"};
  app.require_subcommand(1);
  Options o;
  auto* solve = app.add_subcommand("solve", "solve the HJB equation and write the value grid");
  auto* sweep = app.add_subcommand("sweep", "n-sweep convergence experiment");
  auto* audit = app.add_subcommand("audit", "run the invariant checks");
  auto* simulate = app.add_subcommand("simulate", "per-seed queue simulation output");
  add_common(solve, o, true);
  add_common(sweep, o, true);
  add_common(audit, o, false);
  add_common(simulate, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = load(o);
    if (solve->parsed()) {
      const auto summary = qedlab::cmd_solve(cfg, o.out.empty() ? "value_grid.csv" : o.out, std::cout);
      (void)summary;
      return 0;
    }
    if (sweep->parsed()) {
      auto csv = qedlab::open_csv_for_append(o.out.empty() ? cfg.output_path : o.out, qedlab::kSweepHeader);
      qedlab::cmd_sweep(cfg, *csv, std::cerr);
      return 0;
    }
    if (simulate->parsed()) {
      auto csv = qedlab::open_csv_for_append(o.out.empty() ? cfg.output_path : o.out, qedlab::kSimHeader);
      qedlab::cmd_simulate(cfg, *csv, std::cerr);
      return 0;
    }
    if (audit->parsed()) {
      const auto lines = qedlab::cmd_audit(cfg, std::cout);
      std::size_t failed = 0;
      for (const auto& l : lines) failed += l.passed ? 0 : 1;
      std::cout << (failed == 0 ? "audit: all " : "audit: ") << (failed == 0 ? lines.size() : failed)
                << (failed == 0 ? " checks passed\n" : " check(s) failed\n");
      return failed == 0 ? 0 : 1;
    }
  } catch (const qedlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
