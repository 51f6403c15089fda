#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qedlab/cost.hpp"
#include "qedlab/hjb.hpp"
#include "qedlab/model_params.hpp"

namespace qedlab {

enum class PolicyKind { PSCP, NSCP1, NSCP2, StaticPriority, CMu, CMuTheta, CustomPreemptive };

/// Scheduling rule of the n-th system, a pure function of the current state.
/// Preemptive kinds return a target service vector after every event;
/// nonpreemptive kinds only choose which queue feeds a freed server.
struct SchedulingPolicy {
  PolicyKind kind = PolicyKind::PSCP;
  std::string id;
  PolicyFn policy_fn;                       // h (PSCP, NSCP1) or h_eps (NSCP2)
  std::vector<std::size_t> priority_order;  // 0-based classes, highest priority first
  Vec weights;                              // c_i for the c-mu rules
  bool declares_work_conserving = true;
  bool declares_nonpreemptive = true;
  std::function<IVec(const QueueState&, const SystemParams&)> custom_assign;

  bool preemptive() const { return kind == PolicyKind::PSCP || kind == PolicyKind::CustomPreemptive; }
};

/// z_i = floor(y_i) for i < k, z_k takes the remainder.  Sum-preserving with
/// |z - y| <= 2k.  Throws NonIntegerTotal.
IVec theta_round(std::span<const double> y);

/// Target service vector of the preemptive policy driven by h.  Falls back to
/// static priority (highest class index first) when some class holds fewer
/// customers than the total queue.
IVec p_scp_assign(const QueueState& state, const SystemParams& sys, const PolicyFn& h);

/// Class routed to a freed server: the largest i with phi_i >= max(M_i, 1),
/// M = (1.X - n)^+ h(X_hat).  Returns nullopt if every queue is empty.
std::optional<std::size_t> n_scp_pick_class(const QueueState& state, const SystemParams& sys, const PolicyFn& h);

/// Pick-class rule for StaticPriority, CMu and CMuTheta.  Ties go to the
/// larger class index.
std::optional<std::size_t> baseline_pick_class(const QueueState& state, const SystemParams& sys,
                                               const SchedulingPolicy& policy);

/// Dispatch for nonpreemptive kinds.
std::optional<std::size_t> pick_class(const SchedulingPolicy& policy, const QueueState& state,
                                      const SystemParams& sys);

/// Dispatch for preemptive kinds.
IVec assign_service(const SchedulingPolicy& policy, const QueueState& state, const SystemParams& sys);

using EpsRule = std::function<double(std::int64_t)>;
double default_eps_rule(std::int64_t n);  // n^(-1/4)

SchedulingPolicy make_pscp(PolicyFn h);
SchedulingPolicy make_nscp1(PolicyFn h);
/// Throws NonConvexCost unless the cost is convex in u.
SchedulingPolicy make_nscp2(PolicyFn h, std::size_t k, std::int64_t n, const CostSpec& cost,
                            const EpsRule& eps_rule = default_eps_rule);
SchedulingPolicy make_static_priority(std::vector<std::size_t> order);
SchedulingPolicy make_cmu(Vec c);
/// Throws ZeroTheta if some theta_i == 0.
SchedulingPolicy make_cmu_theta(Vec c, const Vec& theta);
SchedulingPolicy make_custom_preemptive(std::string id,
                                        std::function<IVec(const QueueState&, const SystemParams&)> assign);

/// Queue composition u^n = Phi / (1.X - n)^+, or uniform when nobody waits.
Vec queue_composition(const QueueState& state, const SystemParams& sys);

}  // namespace qedlab
