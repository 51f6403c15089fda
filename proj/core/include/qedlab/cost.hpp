#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qedlab/model_params.hpp"

namespace qedlab {

enum class CostKind {
  PowerQueue,         // sum c_i phi_i^p_i
  LinearQueue,        // sum c_i phi_i (also covers the delay cost)
  Abandonment,        // sum c_i theta_i phi_i
  Idling,             // -1.psi, i.e. (1.x)^- under work conservation
  CustomersInSystem,  // sum c_i (phi_i + psi_i), diffusion scale
  WeightedSum,
  Custom,             // user-supplied Ltilde; not a catalog kind
};

/// Running cost Ltilde(phi_hat, psi_hat) in diffusion scale.  Every cost may
/// carry a constant `offset` added to its value.
struct CostSpec {
  CostKind kind = CostKind::LinearQueue;
  Vec coeffs;
  Vec powers;  // PowerQueue only
  Vec theta;   // Abandonment only
  std::vector<CostSpec> terms;  // WeightedSum only
  double offset = 0.0;
  int growth_degree = 1;
  double growth_constant = 1.0;
  bool convex_in_u = true;
  std::function<double(std::span<const double>, std::span<const double>)> custom;
  std::string id;

  bool is_catalog() const;
  /// All PowerQueue terms with p_i >= 2 and c_i > 0.
  bool smooth_policy_expected() const;
  /// Stable identifier string; its FNV-1a hash tags serialized grids.
  std::string describe() const;
  std::uint64_t hash() const;
};

CostSpec power_queue_cost(Vec coeffs, Vec powers);
CostSpec linear_queue_cost(Vec coeffs);
CostSpec abandonment_cost(Vec coeffs, Vec theta);
CostSpec idling_cost(std::size_t k);
CostSpec customers_in_system_cost(Vec coeffs);
CostSpec weighted_sum_cost(std::vector<CostSpec> terms);
CostSpec zero_cost(std::size_t k);

/// Throws NegativeQueue if some phi_hat_i < -1e-9.
double eval_Ltilde(const CostSpec& spec, std::span<const double> phi_hat, std::span<const double> psi_hat);

/// L(x, u) = Ltilde((1.x)^+ u, x - (1.x)^+ u).  Throws SimplexViolation.
double eval_L(const CostSpec& spec, std::span<const double> x_hat, std::span<const double> u);

/// Same as eval_L without the simplex check; for hot loops whose u is
/// generated on the simplex.
double eval_L_unchecked(const CostSpec& spec, std::span<const double> x_hat, std::span<const double> u);

struct HolderBound {
  double constant = 0.0;
  double exponent = 1.0;
};

/// Lipschitz bound of x -> L(x, u), uniform in u, on [-R, R]^k.
HolderBound local_holder_bound(const CostSpec& spec, std::size_t k, double box_radius);

std::uint64_t fnv1a(std::string_view text);

}  // namespace qedlab
