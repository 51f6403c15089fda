#include "qedlab/diffusion_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qedlab/error.hpp"
#include "qedlab/queue_sim.hpp"

namespace qedlab {

void SdeRunConfig::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (!(horizon >= dt)) throw Error(ErrorKind::InvalidArgument, "horizon must be >= dt");
  if (reps < 1) throw Error(ErrorKind::InvalidArgument, "reps must be >= 1");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replication) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + replication + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

struct PathSampler {
  const SdeRunConfig& cfg;
  const PolicyFn& policy;
  const CostSpec& cost;
  const DiffusionCoeffs& coeffs;
  const LimitParams& limits;

  // Runs one path; `at_step(m, t, x, running)` fires before step m.
  template <typename Hook>
  double run(std::uint64_t replication, double& running_max, Hook&& at_step) const {
    const std::size_t k = limits.k;
    std::mt19937_64 rng(stream_seed(cfg.seed, replication));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto steps = static_cast<std::int64_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
    const double sq = std::sqrt(cfg.dt);
    const double decay = std::exp(-limits.gamma * cfg.dt);
    Vec x = cfg.x0;
    Vec z(k);
    double discount = 1.0;
    double total = 0.0;
    for (std::int64_t m = 0; m < steps; ++m) {
      at_step(m, x, total, discount);
      const Vec u = policy(x);
      const double l = eval_L_unchecked(cost, x, u);
      running_max = std::max(running_max, l);
      total += discount * l * cfg.dt;
      for (std::size_t i = 0; i < k; ++i) z[i] = normal(rng);
      const double excess = std::max(std::accumulate(x.begin(), x.end(), 0.0), 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        const double b = coeffs.ell[i] + (limits.mu[i] - limits.theta[i]) * excess * u[i] - limits.mu[i] * x[i];
        x[i] += b * cfg.dt + coeffs.r[i] * sq * z[i];
      }
      discount *= decay;
    }
    at_step(steps, x, total, discount);
    return total;
  }
};

std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

DiffusionEstimate simulate_cost(const SdeRunConfig& cfg, const PolicyFn& policy, const CostSpec& cost,
                                const DiffusionCoeffs& coeffs, const LimitParams& limits) {
  cfg.validate();
  if (cfg.x0.size() != limits.k) throw Error(ErrorKind::InvalidArgument, "x0 has wrong dimension");
  const PathSampler sampler{cfg, policy, cost, coeffs, limits};
  DiffusionEstimate out;
  out.costs.reserve(static_cast<std::size_t>(cfg.reps));
  double running_max = 0.0;
  for (int j = 0; j < cfg.reps; ++j)
    out.costs.push_back(sampler.run(static_cast<std::uint64_t>(j), running_max, [](auto&&...) {}));
  std::tie(out.mean, out.se) = mean_se(out.costs);
  const double steps = std::ceil(cfg.horizon / cfg.dt - 1e-9);
  out.tail_bound = tail_bound(limits.gamma, cost.growth_degree, running_max, steps * cfg.dt, 10.0);
  return out;
}

std::vector<PolicyComparisonRow> compare_policies(const SdeRunConfig& cfg, const std::vector<NamedPolicy>& policies,
                                                  const CostSpec& cost, const DiffusionCoeffs& coeffs,
                                                  const LimitParams& limits) {
  std::vector<PolicyComparisonRow> rows;
  if (policies.empty()) return rows;
  std::vector<DiffusionEstimate> estimates;
  for (const auto& p : policies) estimates.push_back(simulate_cost(cfg, p.fn, cost, coeffs, limits));
  const auto& ref = estimates.front().costs;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    PolicyComparisonRow row;
    row.id = policies[p].id;
    row.mean = estimates[p].mean;
    row.se = estimates[p].se;
    std::vector<double> diff(ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j) diff[j] = estimates[p].costs[j] - ref[j];
    std::tie(row.diff_vs_reference, row.se_diff) = mean_se(diff);
    row.reference_not_worse = row.diff_vs_reference >= -3.0 * row.se_diff;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DriftCheckRow> value_drift_check(const SdeRunConfig& cfg, const PolicyFn& policy, const CostSpec& cost,
                                             const DiffusionCoeffs& coeffs, const LimitParams& limits,
                                             const ValueGrid& vg, const std::vector<double>& times) {
  cfg.validate();
  const PathSampler sampler{cfg, policy, cost, coeffs, limits};
  std::vector<std::int64_t> marks;
  for (double t : times) marks.push_back(static_cast<std::int64_t>(std::llround(t / cfg.dt)));
  std::vector<std::vector<double>> samples(times.size());
  const double f0 = vg.value_at(cfg.x0);
  double running_max = 0.0;
  for (int j = 0; j < cfg.reps; ++j) {
    sampler.run(static_cast<std::uint64_t>(j), running_max,
                [&](std::int64_t m, const Vec& x, double running, double discount) {
                  for (std::size_t q = 0; q < marks.size(); ++q)
                    if (marks[q] == m) samples[q].push_back(discount * vg.value_at(x) + running - f0);
                });
  }
  std::vector<DriftCheckRow> rows;
  for (std::size_t q = 0; q < times.size(); ++q) {
    DriftCheckRow row;
    row.time = static_cast<double>(marks[q]) * cfg.dt;
    std::tie(row.mean, row.se) = mean_se(samples[q]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qedlab
