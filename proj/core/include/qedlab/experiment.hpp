#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qedlab/cost.hpp"
#include "qedlab/diffusion_sim.hpp"
#include "qedlab/hjb.hpp"
#include "qedlab/model_params.hpp"
#include "qedlab/policies.hpp"
#include "qedlab/queue_sim.hpp"

namespace qedlab {

struct PolicyDescriptor {
  PolicyKind kind = PolicyKind::PSCP;
  std::vector<std::size_t> order;  // StaticPriority, 0-based
  double eps_exponent = 0.25;      // NSCP2: eps_n = n^(-eps_exponent)
};

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  LimitParams limits;
  CostSpec cost;
  std::string cost_id;
  GridSpec grid;
  std::vector<std::int64_t> sweep_n;
  std::vector<PolicyDescriptor> policies;
  int reps = 200;
  std::uint64_t base_seed = 1;
  HorizonRule horizon_rule;
  std::string output_path = "out.csv";
  Vec x0;
  std::vector<Vec> probes;
  InterarrivalFamily interarrival = InterarrivalFamily::Auto;
  double sde_dt = 2e-3;
  int sde_reps = 2000;
  bool inject_corrupt_policy = false;  // audit test hook
  bool control_variate = true;         // value-function martingale in sweeps
};

/// Parses the JSON config text; validates the limits (throws
/// BalanceViolation and friends) and the structural invariants.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Builds the scheduling policy for system size n from a descriptor.
SchedulingPolicy build_policy(const PolicyDescriptor& d, const ExperimentConfig& cfg,
                              std::shared_ptr<const ValueGrid> vg, std::int64_t n);
std::string policy_label(const PolicyDescriptor& d);

/// Simulation horizon for one sweep cell: a pilot run of `policy` sets the
/// running-cost scale fed to horizon_for().
double sweep_horizon(const ExperimentConfig& cfg, const SystemParams& sys, const SchedulingPolicy& policy,
                     const QueueState& initial);

/// Opens `path` for appending rows under `header`.  A non-empty existing file
/// must start with exactly that header line (IoError otherwise).
std::unique_ptr<std::ostream> open_csv_for_append(const std::string& path, const std::string& header);

inline constexpr const char* kSweepHeader =
    "experiment_id,n,policy_id,cost_id,x0,mean_cost,se,gap_to_V,wc_violations,np_violations,seed_range";
inline constexpr const char* kSimHeader =
    "seed,n,policy_id,cost_id,discounted_cost,tail_bound,abandon_gap_max_se,wc_violations,np_violations,events";

struct SolveSummary {
  ValueGrid grid;
  ResidualReport residual;
  std::vector<std::pair<Vec, double>> probe_values;
};

SolveSummary cmd_solve(const ExperimentConfig& cfg, const std::string& grid_out, std::ostream& log);

struct SweepRow {
  std::string n;  // system size, "diffusion" or "grid"
  std::string policy_id;
  double mean = 0.0;
  double se = 0.0;
  double gap_to_v = 0.0;
  std::int64_t wc_violations = 0;
  std::int64_t np_violations = 0;
  std::string seed_range;
  double control_gap = 0.0;
  double control_gap_se = 0.0;
};

struct SweepResult {
  double value_at_x0 = 0.0;
  std::vector<SweepRow> rows;
};

SweepResult cmd_sweep(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& log,
                      std::shared_ptr<const ValueGrid> solved = nullptr);

struct AuditLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<AuditLine> cmd_audit(const ExperimentConfig& cfg, std::ostream& log,
                                 std::shared_ptr<const ValueGrid> solved = nullptr);

/// One replication per seed for every (n, policy) cell, in SimResult CSV form.
void cmd_simulate(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& log,
                  std::shared_ptr<const ValueGrid> solved = nullptr);

std::string format_vec(const Vec& v, char sep = ';');

}  // namespace qedlab
