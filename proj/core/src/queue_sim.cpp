#include "qedlab/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qedlab/error.hpp"

namespace qedlab {

InterarrivalSampler::InterarrivalSampler(double mean, double scv, InterarrivalFamily family)
    : family_(family), mean_(mean), scv_(scv) {
  if (!(mean > 0.0)) throw Error(ErrorKind::InvalidArgument, "interarrival mean must be positive");
  if (!(scv >= 0.0)) throw Error(ErrorKind::InvalidArgument, "interarrival scv must be >= 0");
  if (family_ == InterarrivalFamily::Auto) {
    if (scv == 0.0) family_ = InterarrivalFamily::Deterministic;
    else if (scv == 1.0) family_ = InterarrivalFamily::Exponential;
    else if (scv < 1.0) family_ = InterarrivalFamily::Gamma;
    else family_ = InterarrivalFamily::HyperExpBalanced;
  }
  switch (family_) {
    case InterarrivalFamily::Gamma:
      if (!(scv > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma interarrivals need scv > 0");
      gamma_ = std::gamma_distribution<double>(1.0 / scv, scv * mean);
      break;
    case InterarrivalFamily::HyperExpBalanced:
      if (!(scv >= 1.0)) throw Error(ErrorKind::InvalidArgument, "hyperexponential interarrivals need scv >= 1");
      p1_ = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
      rate1_ = 2.0 * p1_ / mean;
      rate2_ = 2.0 * (1.0 - p1_) / mean;
      break;
    default:
      break;
  }
}

double InterarrivalSampler::operator()(std::mt19937_64& rng) {
  switch (family_) {
    case InterarrivalFamily::Exponential:
      return mean_ * exp_(rng);
    case InterarrivalFamily::Gamma: {
      double v = 0.0;
      while (!(v > 0.0)) v = gamma_(rng);
      return v;
    }
    case InterarrivalFamily::HyperExpBalanced: {
      const double rate = unif_(rng) < p1_ ? rate1_ : rate2_;
      return exp_(rng) / rate;
    }
    case InterarrivalFamily::Deterministic:
    case InterarrivalFamily::Auto:
      break;
  }
  return mean_;
}

double SimResult::abandon_gap_max_se() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < observed_abandonments.size(); ++i) {
    const double diff = std::abs(observed_abandonments[i] - expected_abandonments[i]);
    worst = std::max(worst, diff / std::sqrt(std::max(expected_abandonments[i], 1.0)));
  }
  return worst;
}

double tail_bound(double gamma, int growth_degree, double running_max, double horizon, double safety) {
  const double s = gamma * horizon;
  return safety * running_max * std::exp(-s) * std::pow(1.0 + s, growth_degree) / gamma;
}

double horizon_for(double gamma, int growth_degree, double pilot_max, double pilot_scale, const HorizonRule& rule) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  if (!(rule.rel_tail > 0.0)) throw Error(ErrorKind::InvalidArgument, "rel_tail must be positive");
  if (rule.rel_tail >= 1.0) return rule.pilot_horizon;
  const double ratio = pilot_scale > 0.0 ? std::max(pilot_max / pilot_scale, 1.0) : 1.0;
  auto excess = [&](double s) {
    return std::log(rule.safety * ratio) + growth_degree * std::log1p(s) - s - std::log(rule.rel_tail);
  };
  // excess is eventually decreasing in s; bracket and bisect its last root.
  double lo = std::max(0.0, static_cast<double>(growth_degree) - 1.0);
  double hi = std::max(lo, 1.0);
  while (excess(hi) > 0.0) hi *= 2.0;
  if (excess(lo) <= 0.0) return std::max(lo / gamma, 0.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi / gamma;
}

namespace {

struct Workspace {
  Vec phi_hat, psi_hat;
};

double running_cost(const QueueState& s, const SystemParams& sys, const CostSpec& cost, Workspace& ws) {
  const double sn = sys.sqrt_n();
  const double dn = static_cast<double>(sys.n);
  for (std::size_t i = 0; i < s.k(); ++i) {
    ws.phi_hat[i] = static_cast<double>(s.phi[i]) / sn;
    ws.psi_hat[i] = (static_cast<double>(s.psi[i]) - sys.rho[i] * dn) / sn;
  }
  return eval_Ltilde(cost, ws.phi_hat, ws.psi_hat);
}

[[noreturn]] void breach(const QueueState& s, const std::string& what) {
  std::ostringstream os;
  os << what << " at t=" << s.now << " phi=(";
  for (std::size_t i = 0; i < s.k(); ++i) os << (i ? "," : "") << s.phi[i];
  os << ") psi=(";
  for (std::size_t i = 0; i < s.k(); ++i) os << (i ? "," : "") << s.psi[i];
  os << ")";
  throw Error(ErrorKind::InvariantBreach, os.str());
}

}  // namespace

SimResult run_simulation(const SystemParams& sys, const SchedulingPolicy& policy, const CostSpec& cost,
                         const QueueState& initial, double horizon, std::uint64_t seed, const SimOptions& options) {
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  const std::size_t k = sys.k();
  if (initial.k() != k) throw Error(ErrorKind::InvalidArgument, "initial state has wrong class count");
  const double gamma = sys.gamma;
  const std::int64_t n = sys.n;

  std::mt19937_64 rng(seed);
  std::vector<InterarrivalSampler> samplers;
  samplers.reserve(k);
  for (std::size_t i = 0; i < k; ++i) samplers.emplace_back(1.0 / sys.lambda_n[i], sys.c2u[i], options.family);
  std::exponential_distribution<double> unit_exp(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  QueueState s = initial;
  s.now = 0.0;
  std::fill(s.cum_arrivals.begin(), s.cum_arrivals.end(), 0);
  std::fill(s.cum_services.begin(), s.cum_services.end(), 0);
  std::fill(s.cum_abandonments.begin(), s.cum_abandonments.end(), 0);
  std::fill(s.cum_routed.begin(), s.cum_routed.end(), 0);
  std::fill(s.int_phi.begin(), s.int_phi.end(), 0.0);
  std::fill(s.int_psi.begin(), s.int_psi.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) s.next_arrival[i] = samplers[i](rng);
  const IVec x0 = s.x();
  const IVec psi0 = s.psi;

  SimResult out;
  out.seed = seed;
  out.horizon = horizon;
  Workspace ws{Vec(k), Vec(k)};
  IVec routed_prev = s.cum_routed;

  auto apply_preemptive = [&] {
    const IVec target = assign_service(policy, s, sys);
    const IVec x = s.x();
    if (target.size() != k) throw Error(ErrorKind::PolicyContractViolation, "policy returned wrong dimension");
    std::int64_t busy = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (target[i] < 0 || target[i] > x[i]) {
        std::ostringstream os;
        os << policy.id << " assigned psi_" << i + 1 << "=" << target[i] << " with X_" << i + 1 << "=" << x[i];
        throw Error(ErrorKind::PolicyContractViolation, os.str());
      }
      busy += target[i];
    }
    if (busy > n) {
      std::ostringstream os;
      os << policy.id << " assigned " << busy << " busy servers with n=" << n;
      throw Error(ErrorKind::PolicyContractViolation, os.str());
    }
    for (std::size_t i = 0; i < k; ++i) {
      s.psi[i] = target[i];
      s.phi[i] = x[i] - target[i];
    }
  };

  auto fill_free_servers = [&] {
    while (s.busy() < n && s.waiting() > 0) {
      const auto cls = pick_class(policy, s, sys);
      if (!cls || s.phi[*cls] <= 0) throw Error(ErrorKind::PolicyContractViolation, policy.id + " picked an empty queue");
      --s.phi[*cls];
      ++s.psi[*cls];
    }
  };

  auto audit = [&] {
    const IVec x = s.x();
    for (std::size_t i = 0; i < k; ++i) {
      if (s.phi[i] < 0 || s.psi[i] < 0) breach(s, "negative occupancy");
      if (x[i] != x0[i] + s.cum_arrivals[i] - s.cum_services[i] - s.cum_abandonments[i]) breach(s, "flow balance broken");
      s.cum_routed[i] = s.psi[i] - psi0[i] + s.cum_services[i];
      if (s.cum_routed[i] < routed_prev[i]) ++out.np_violations;
    }
    if (s.busy() > n) breach(s, "more busy servers than n");
    routed_prev = s.cum_routed;
    if (policy.declares_work_conserving && std::max<std::int64_t>(0, s.total() - n) != s.waiting()) ++out.wc_violations;
    if (options.observer) options.observer(s);
  };

  if (policy.preemptive()) apply_preemptive();
  audit();

  double cost_now = running_cost(s, sys, cost, ws);
  out.max_running_cost = cost_now;
  double gap_now = 0.0;
  auto refresh_gap = [&] {
    if (!options.diagnostic_h) return;
    const std::int64_t excess = std::max<std::int64_t>(0, s.total() - n);
    gap_now = 0.0;
    if (excess == 0) return;
    const Vec h = options.diagnostic_h(rescale_x(s.x(), sys));
    const Vec u = queue_composition(s, sys);
    for (std::size_t i = 0; i < k; ++i) gap_now += (u[i] - h[i]) * (u[i] - h[i]);
    gap_now = std::sqrt(gap_now);
  };
  refresh_gap();

  // Martingale control variate.
  bool poisson = true;
  for (const auto& sm : samplers) poisson = poisson && sm.family() == InterarrivalFamily::Exponential;
  out.control_variate = poisson && static_cast<bool>(options.control_value);
  const double step = 1.0 / sys.sqrt_n();
  Vec xh(k);
  double f_now = 0.0, drift_now = 0.0, f_start = 0.0;
  auto refresh_generator = [&] {
    if (!out.control_variate) return;
    const IVec x = s.x();
    for (std::size_t i = 0; i < k; ++i) xh[i] = (static_cast<double>(x[i]) - sys.rho[i] * static_cast<double>(n)) * step;
    f_now = options.control_value(xh);
    double a = -gamma * f_now;
    for (std::size_t i = 0; i < k; ++i) {
      const double x_i = xh[i];
      xh[i] = x_i + step;
      a += sys.lambda_n[i] * (options.control_value(xh) - f_now);
      const double down = sys.mu_n[i] * static_cast<double>(s.psi[i]) + sys.theta_n[i] * static_cast<double>(s.phi[i]);
      if (down > 0.0) {
        xh[i] = x_i - step;
        a += down * (options.control_value(xh) - f_now);
      }
      xh[i] = x_i;
    }
    drift_now = a;
  };
  refresh_generator();
  f_start = f_now;

  const double inf = std::numeric_limits<double>::infinity();
  while (true) {
    double total_rate = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      total_rate += sys.theta_n[i] * static_cast<double>(s.phi[i]) + sys.mu_n[i] * static_cast<double>(s.psi[i]);
    const double t_exp = total_rate > 0.0 ? s.now + unit_exp(rng) / total_rate : inf;
    std::size_t arrival_class = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (s.next_arrival[i] < s.next_arrival[arrival_class]) arrival_class = i;
    const double t_arr = s.next_arrival[arrival_class];
    const double t_next = std::min({t_exp, t_arr, horizon});

    // State is constant on [now, t_next): integrate in closed form.
    const double dt = t_next - s.now;
    const double weight = (std::exp(-gamma * s.now) - std::exp(-gamma * t_next)) / gamma;
    out.discounted_cost += cost_now * weight;
    out.control_gap += gamma * gap_now * weight;
    out.martingale -= drift_now * weight;
    for (std::size_t i = 0; i < k; ++i) {
      s.int_phi[i] += static_cast<double>(s.phi[i]) * dt;
      s.int_psi[i] += static_cast<double>(s.psi[i]) * dt;
    }
    s.now = t_next;
    if (t_next >= horizon) break;

    if (t_exp <= t_arr) {
      // Abandonments before service completions, lower class first.
      double pick = unit(rng) * total_rate;
      bool done = false;
      for (std::size_t i = 0; i < k && !done; ++i) {
        const double r = sys.theta_n[i] * static_cast<double>(s.phi[i]);
        if (r > 0.0 && pick < r) {
          --s.phi[i];
          ++s.cum_abandonments[i];
          done = true;
        } else {
          pick -= r;
        }
      }
      for (std::size_t i = 0; i < k && !done; ++i) {
        const double r = sys.mu_n[i] * static_cast<double>(s.psi[i]);
        if (r > 0.0 && (pick < r || i + 1 == k)) {
          --s.psi[i];
          ++s.cum_services[i];
          done = true;
        } else {
          pick -= r;
        }
      }
      if (!done) {
        // Round-off pushed `pick` past the last positive rate.
        for (std::size_t i = k; i-- > 0 && !done;) {
          if (s.psi[i] > 0) {
            --s.psi[i];
            ++s.cum_services[i];
            done = true;
          } else if (s.phi[i] > 0) {
            --s.phi[i];
            ++s.cum_abandonments[i];
            done = true;
          }
        }
      }
      if (!policy.preemptive()) fill_free_servers();
    } else {
      const std::size_t i = arrival_class;
      ++s.cum_arrivals[i];
      s.next_arrival[i] += samplers[i](rng);
      if (policy.preemptive()) {
        ++s.phi[i];
      } else if (s.busy() < n) {
        ++s.psi[i];
      } else {
        ++s.phi[i];
      }
    }
    if (policy.preemptive()) apply_preemptive();
    ++out.event_count;
    audit();
    cost_now = running_cost(s, sys, cost, ws);
    out.max_running_cost = std::max(out.max_running_cost, cost_now);
    refresh_gap();
    refresh_generator();
  }
  if (out.control_variate) out.martingale += std::exp(-gamma * horizon) * f_now - f_start;

  out.tail_bound = tail_bound(gamma, cost.growth_degree, out.max_running_cost, horizon, options.tail_safety);
  out.observed_abandonments.resize(k);
  out.expected_abandonments.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.observed_abandonments[i] = static_cast<double>(s.cum_abandonments[i]);
    out.expected_abandonments[i] = sys.theta_n[i] * s.int_phi[i];
  }
  out.final_state = std::move(s);
  return out;
}

ReplicationSummary replicate(const SystemParams& sys, const SchedulingPolicy& policy, const CostSpec& cost,
                             const QueueState& initial, double horizon, int reps, std::uint64_t base_seed,
                             const SimOptions& options) {
  if (reps < 2) throw Error(ErrorKind::InvalidArgument, "replicate needs reps >= 2");
  const std::size_t k = sys.k();
  ReplicationSummary out;
  out.first_seed = base_seed;
  out.last_seed = base_seed + static_cast<std::uint64_t>(reps - 1);
  out.mean_observed_abandonments.assign(k, 0.0);
  out.mean_expected_abandonments.assign(k, 0.0);
  std::vector<Vec> diffs(k);
  std::vector<double> gaps, raw;
  bool all_cv = true;
  for (int j = 0; j < reps; ++j) {
    const SimResult r = run_simulation(sys, policy, cost, initial, horizon, base_seed + static_cast<std::uint64_t>(j), options);
    out.costs.push_back(r.controlled_cost());
    raw.push_back(r.discounted_cost);
    all_cv = all_cv && r.control_variate;
    gaps.push_back(r.control_gap);
    out.wc_violations += r.wc_violations;
    out.np_violations += r.np_violations;
    out.events += r.event_count;
    out.mean_tail_bound += r.tail_bound / reps;
    for (std::size_t i = 0; i < k; ++i) {
      out.mean_observed_abandonments[i] += r.observed_abandonments[i] / reps;
      out.mean_expected_abandonments[i] += r.expected_abandonments[i] / reps;
      diffs[i].push_back(r.observed_abandonments[i] - r.expected_abandonments[i]);
    }
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double var = ss / static_cast<double>(v.size() - 1);
    return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
  };
  if (!all_cv) out.costs = raw;
  out.control_variate = all_cv;
  std::tie(out.mean_cost, out.std_error) = mean_se(out.costs);
  std::tie(out.raw_mean_cost, out.raw_std_error) = mean_se(raw);
  std::tie(out.mean_control_gap, out.se_control_gap) = mean_se(gaps);
  out.abandonment_gap_se.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto [m, se] = mean_se(diffs[i]);
    if (m == 0.0 && se == 0.0) continue;
    out.abandonment_gap_se[i] = se > 0.0 ? std::abs(m) / se : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace qedlab
