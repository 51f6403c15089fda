#include "qedlab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qedlab/error.hpp"

namespace qedlab {

IVec theta_round(std::span<const double> y) {
  const std::size_t k = y.size();
  if (k == 0) return {};
  const double total = std::accumulate(y.begin(), y.end(), 0.0);
  const double rounded = std::round(total);
  if (std::abs(total - rounded) > 1e-9 * std::max(1.0, std::abs(total)))
    throw Error(ErrorKind::NonIntegerTotal, "Theta rounding needs an integer component total");
  IVec z(k);
  std::int64_t partial = 0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (y[i] < -1e-9) throw Error(ErrorKind::InvalidArgument, "Theta rounding needs a nonnegative vector");
    // Snap values within rounding noise of an integer before flooring.
    const double near = std::round(y[i]);
    const double yi = std::abs(y[i] - near) < 1e-9 ? near : y[i];
    z[i] = static_cast<std::int64_t>(std::floor(std::max(yi, 0.0)));
    partial += z[i];
  }
  z[k - 1] = static_cast<std::int64_t>(rounded) - partial;
  return z;
}

Vec queue_composition(const QueueState& state, const SystemParams& sys) {
  const std::size_t k = state.k();
  const std::int64_t excess = std::max<std::int64_t>(0, state.total() - sys.n);
  Vec u(k, 1.0 / static_cast<double>(k));
  if (excess > 0)
    for (std::size_t i = 0; i < k; ++i) u[i] = static_cast<double>(state.phi[i]) / static_cast<double>(excess);
  return u;
}

namespace {

Vec scaled_target(const QueueState& state, const SystemParams& sys, const PolicyFn& h, std::int64_t excess) {
  const IVec x = state.x();
  const Vec x_hat = rescale_x(x, sys);
  Vec u = h(x_hat);
  for (double& ui : u) ui *= static_cast<double>(excess);
  return u;
}

}  // namespace

IVec p_scp_assign(const QueueState& state, const SystemParams& sys, const PolicyFn& h) {
  const std::size_t k = state.k();
  const IVec x = state.x();
  const std::int64_t excess = std::max<std::int64_t>(0, state.total() - sys.n);
  if (excess == 0) return x;

  const bool enough_everywhere = std::all_of(x.begin(), x.end(), [excess](std::int64_t xi) { return xi >= excess; });
  IVec psi(k);
  if (enough_everywhere) {
    const IVec phi = theta_round(scaled_target(state, sys, h, excess));
    for (std::size_t i = 0; i < k; ++i) psi[i] = x[i] - phi[i];
    return psi;
  }
  // Static priority, class k highest.
  std::int64_t free_servers = sys.n;
  for (std::size_t i = k; i-- > 0;) {
    psi[i] = std::min(x[i], free_servers);
    free_servers -= psi[i];
  }
  return psi;
}

std::optional<std::size_t> n_scp_pick_class(const QueueState& state, const SystemParams& sys, const PolicyFn& h) {
  if (state.waiting() == 0) return std::nullopt;
  const std::size_t k = state.k();
  const std::int64_t excess = std::max<std::int64_t>(0, state.total() - sys.n);
  Vec target(k, 0.0);
  if (excess > 0) target = scaled_target(state, sys, h, excess);
  for (std::size_t i = k; i-- > 0;) {
    if (static_cast<double>(state.phi[i]) >= std::max(target[i], 1.0)) return i;
  }
  std::ostringstream os;
  os << "no class qualifies although " << state.waiting() << " customers wait";
  throw Error(ErrorKind::EmptyK0, os.str());
}

std::optional<std::size_t> baseline_pick_class(const QueueState& state, const SystemParams& sys,
                                               const SchedulingPolicy& policy) {
  const std::size_t k = state.k();
  if (state.waiting() == 0) return std::nullopt;
  switch (policy.kind) {
    case PolicyKind::StaticPriority:
      for (std::size_t cls : policy.priority_order)
        if (state.phi[cls] > 0) return cls;
      break;
    case PolicyKind::CMu:
    case PolicyKind::CMuTheta: {
      std::optional<std::size_t> best;
      double best_index = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i) {
        if (state.phi[i] == 0) continue;
        double index = policy.weights[i] * sys.mu_n[i];
        if (policy.kind == PolicyKind::CMuTheta) index /= sys.theta_n[i];
        if (index >= best_index) {
          best_index = index;
          best = i;
        }
      }
      return best;
    }
    default:
      break;
  }
  throw Error(ErrorKind::InvalidArgument, "policy is not a pick-class baseline");
}

std::optional<std::size_t> pick_class(const SchedulingPolicy& policy, const QueueState& state,
                                      const SystemParams& sys) {
  switch (policy.kind) {
    case PolicyKind::NSCP1:
    case PolicyKind::NSCP2:
      return n_scp_pick_class(state, sys, policy.policy_fn);
    case PolicyKind::StaticPriority:
    case PolicyKind::CMu:
    case PolicyKind::CMuTheta:
      return baseline_pick_class(state, sys, policy);
    default:
      throw Error(ErrorKind::InvalidArgument, "pick_class called on a preemptive policy");
  }
}

IVec assign_service(const SchedulingPolicy& policy, const QueueState& state, const SystemParams& sys) {
  switch (policy.kind) {
    case PolicyKind::PSCP:
      return p_scp_assign(state, sys, policy.policy_fn);
    case PolicyKind::CustomPreemptive:
      return policy.custom_assign(state, sys);
    default:
      throw Error(ErrorKind::InvalidArgument, "assign_service called on a nonpreemptive policy");
  }
}

double default_eps_rule(std::int64_t n) { return std::pow(static_cast<double>(n), -0.25); }

SchedulingPolicy make_pscp(PolicyFn h) {
  SchedulingPolicy p;
  p.kind = PolicyKind::PSCP;
  p.id = "pscp";
  p.policy_fn = std::move(h);
  p.declares_nonpreemptive = false;
  return p;
}

SchedulingPolicy make_nscp1(PolicyFn h) {
  SchedulingPolicy p;
  p.kind = PolicyKind::NSCP1;
  p.id = "nscp1";
  p.policy_fn = std::move(h);
  return p;
}

SchedulingPolicy make_nscp2(PolicyFn h, std::size_t k, std::int64_t n, const CostSpec& cost, const EpsRule& eps_rule) {
  if (!cost.convex_in_u) throw Error(ErrorKind::NonConvexCost, "N-SCP(ii) needs a cost convex in the control");
  const double eps = eps_rule(n);
  SchedulingPolicy p;
  p.kind = PolicyKind::NSCP2;
  std::ostringstream os;
  os << "nscp2(eps=" << eps << ")";
  p.id = os.str();
  p.policy_fn = mollify_policy(std::move(h), eps, k);
  return p;
}

SchedulingPolicy make_static_priority(std::vector<std::size_t> order) {
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != i) throw Error(ErrorKind::InvalidArgument, "priority order must be a permutation");
  SchedulingPolicy p;
  p.kind = PolicyKind::StaticPriority;
  std::ostringstream os;
  os << "prio(";
  for (std::size_t i = 0; i < order.size(); ++i) os << (i ? "," : "") << order[i] + 1;
  os << ")";
  p.id = os.str();
  p.priority_order = std::move(order);
  return p;
}

SchedulingPolicy make_cmu(Vec c) {
  SchedulingPolicy p;
  p.kind = PolicyKind::CMu;
  p.id = "cmu";
  p.weights = std::move(c);
  return p;
}

SchedulingPolicy make_cmu_theta(Vec c, const Vec& theta) {
  for (double t : theta)
    if (t == 0.0) throw Error(ErrorKind::ZeroTheta, "c-mu/theta rule needs positive abandonment rates");
  SchedulingPolicy p;
  p.kind = PolicyKind::CMuTheta;
  p.id = "cmutheta";
  p.weights = std::move(c);
  return p;
}

SchedulingPolicy make_custom_preemptive(std::string id,
                                        std::function<IVec(const QueueState&, const SystemParams&)> assign) {
  SchedulingPolicy p;
  p.kind = PolicyKind::CustomPreemptive;
  p.id = std::move(id);
  p.custom_assign = std::move(assign);
  p.declares_nonpreemptive = false;
  return p;
}

}  // namespace qedlab
