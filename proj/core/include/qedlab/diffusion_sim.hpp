#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qedlab/cost.hpp"
#include "qedlab/hjb.hpp"
#include "qedlab/model_params.hpp"

namespace qedlab {

struct SdeRunConfig {
  Vec x0;
  double dt = 1e-3;
  double horizon = 15.0;
  int reps = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DiffusionEstimate {
  double mean = 0.0;
  double se = 0.0;
  double tail_bound = 0.0;
  std::vector<double> costs;  // per replication, in replication order
};

/// Euler-Maruyama estimate of E int_0^T e^{-gamma t} L(X_t, h(X_t)) dt.
/// Replication j draws its normals from a generator seeded only by (seed, j),
/// so every policy sees the same noise (common random numbers).
DiffusionEstimate simulate_cost(const SdeRunConfig& cfg, const PolicyFn& policy, const CostSpec& cost,
                                const DiffusionCoeffs& coeffs, const LimitParams& limits);

struct NamedPolicy {
  std::string id;
  PolicyFn fn;
};

struct PolicyComparisonRow {
  std::string id;
  double mean = 0.0;
  double se = 0.0;
  double diff_vs_reference = 0.0;  // this - reference, paired per replication
  double se_diff = 0.0;
  bool reference_not_worse = true;  // reference <= this + 3 se_diff
};

/// The first policy is the reference.
std::vector<PolicyComparisonRow> compare_policies(const SdeRunConfig& cfg, const std::vector<NamedPolicy>& policies,
                                                  const CostSpec& cost, const DiffusionCoeffs& coeffs,
                                                  const LimitParams& limits);

struct DriftCheckRow {
  double time = 0.0;
  double mean = 0.0;
  double se = 0.0;
};

/// Mean of e^{-gamma t} f(X_t) + int_0^t e^{-gamma s} L ds - f(x0) at the
/// requested times, with f the grid value function.  A solution of the HJB
/// equation makes this nonnegative under any control.
std::vector<DriftCheckRow> value_drift_check(const SdeRunConfig& cfg, const PolicyFn& policy, const CostSpec& cost,
                                             const DiffusionCoeffs& coeffs, const LimitParams& limits,
                                             const ValueGrid& vg, const std::vector<double>& times);

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replication);

}  // namespace qedlab
