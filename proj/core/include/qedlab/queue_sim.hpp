#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qedlab/cost.hpp"
#include "qedlab/hjb.hpp"
#include "qedlab/model_params.hpp"
#include "qedlab/policies.hpp"

namespace qedlab {

enum class InterarrivalFamily { Auto, Exponential, Gamma, HyperExpBalanced, Deterministic };

/// Renewal interarrival times with a given mean and squared coefficient of
/// variation.  `Auto` picks exponential (scv = 1), gamma (scv < 1),
/// balanced-means two-phase hyperexponential (scv > 1) or deterministic
/// (scv = 0).
class InterarrivalSampler {
 public:
  InterarrivalSampler(double mean, double scv, InterarrivalFamily family = InterarrivalFamily::Auto);

  double operator()(std::mt19937_64& rng);
  InterarrivalFamily family() const { return family_; }
  double mean() const { return mean_; }
  double scv() const { return scv_; }

 private:
  InterarrivalFamily family_;
  double mean_;
  double scv_;
  double p1_ = 1.0, rate1_ = 1.0, rate2_ = 1.0;
  std::exponential_distribution<double> exp_{1.0};
  std::gamma_distribution<double> gamma_{1.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

struct SimOptions {
  InterarrivalFamily family = InterarrivalFamily::Auto;
  /// Reference h for the queue-composition gap diagnostic (unset: skipped).
  PolicyFn diagnostic_h;
  /// Called after every event with the post-event state.
  std::function<void(const QueueState&)> observer;
  double tail_safety = 10.0;
  /// Value function on diffusion-scaled states.  When set and every class has
  /// Poisson arrivals, the run also accumulates the Dynkin martingale
  ///   M_T = e^{-gamma T} f(X_T) - f(X_0) - int_0^T e^{-gamma s} (A f - gamma f)(X_s) ds
  /// of the jump generator A; E M_T = 0, so cost - M_T is an unbiased,
  /// lower-variance estimate of the same discounted cost.
  std::function<double(std::span<const double>)> control_value;
};

struct SimResult {
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double discounted_cost = 0.0;
  double tail_bound = 0.0;
  Vec observed_abandonments;  // R_i over [0, horizon]
  Vec expected_abandonments;  // theta_i^n * integral of phi_i
  std::int64_t wc_violations = 0;
  std::int64_t np_violations = 0;
  std::int64_t event_count = 0;
  double max_running_cost = 0.0;
  /// gamma * int e^{-gamma t} |u^n - h(X_hat)| dt over queue-positive time.
  double control_gap = 0.0;
  bool control_variate = false;  // martingale accumulated (see SimOptions)
  double martingale = 0.0;
  QueueState final_state;

  /// discounted_cost - martingale (equal to discounted_cost without a control variate).
  double controlled_cost() const { return discounted_cost - martingale; }

  /// max_i |R_i - theta_i int phi_i| / sqrt(max(theta_i int phi_i, 1)).
  double abandon_gap_max_se() const;
};

/// One replication of the n-th system from `initial` over [0, horizon].
/// Throws InvariantBreach or PolicyContractViolation.
SimResult run_simulation(const SystemParams& sys, const SchedulingPolicy& policy, const CostSpec& cost,
                         const QueueState& initial, double horizon, std::uint64_t seed,
                         const SimOptions& options = {});

struct ReplicationSummary {
  /// Per-replication estimates: controlled_cost() when every replication
  /// carried the control variate, the raw discounted cost otherwise.
  std::vector<double> costs;
  double mean_cost = 0.0;
  double std_error = 0.0;
  bool control_variate = false;
  double raw_mean_cost = 0.0;
  double raw_std_error = 0.0;
  /// Per class |mean(R_i) - mean(theta_i int phi_i)| in standard errors of the
  /// per-replication difference; 0 when the difference is identically 0.
  Vec abandonment_gap_se;
  Vec mean_observed_abandonments;
  Vec mean_expected_abandonments;
  std::int64_t wc_violations = 0;
  std::int64_t np_violations = 0;
  std::int64_t events = 0;
  double mean_tail_bound = 0.0;
  double mean_control_gap = 0.0;
  double se_control_gap = 0.0;
  std::uint64_t first_seed = 0;
  std::uint64_t last_seed = 0;
};

/// Replications with seeds base_seed + j, reduced in seed order.
ReplicationSummary replicate(const SystemParams& sys, const SchedulingPolicy& policy, const CostSpec& cost,
                             const QueueState& initial, double horizon, int reps, std::uint64_t base_seed,
                             const SimOptions& options = {});

struct HorizonRule {
  double rel_tail = 1e-4;
  double safety = 10.0;
  double pilot_horizon = 1.0;
};

/// Smallest T with safety * (pilot_max / pilot_scale) (1 + gamma T)^m e^{-gamma T} <= rel_tail;
/// rel_tail >= 1 returns the pilot horizon.
double horizon_for(double gamma, int growth_degree, double pilot_max, double pilot_scale, const HorizonRule& rule);

/// Bound on int_T^inf e^{-gamma t} L dt from the running-cost envelope.
double tail_bound(double gamma, int growth_degree, double running_max, double horizon, double safety);

}  // namespace qedlab
