#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qedlab/cost.hpp"
#include "qedlab/model_params.hpp"
#include "qedlab/simplex.hpp"

namespace qedlab {

/// Drift discretization.  Both variants give an M-matrix for every control.
///   Upwind: first-order one-sided differences in the direction of b_i.
///   Hybrid: central differences, with the diffusion raised to |b_i| dx / 2
///           only where central differencing alone would lose monotonicity.
enum class DriftScheme { Upwind, Hybrid };

struct GridSpec {
  double box_halfwidth = 5.0;
  int points_per_axis = 81;
  int simplex_resolution = 20;
  double tol_residual = 1e-6;
  int max_policy_iters = 50;
  DriftScheme scheme = DriftScheme::Hybrid;
  /// Hybrid only: defect-correction sweeps per policy evaluation that drive
  /// the central-difference defect to zero (0 keeps the monotone solution).
  int defect_sweeps = 50;

  double spacing() const { return 2.0 * box_halfwidth / (points_per_axis - 1); }
  void validate() const;
};

using PolicyFn = std::function<Vec(std::span<const double>)>;

/// b(x, u) = ell + (mu - theta)(1.x)^+ u - mu x
Vec drift(std::span<const double> x, std::span<const double> u, const DiffusionCoeffs& coeffs,
          const LimitParams& limits);

struct HamiltonianValue {
  double value = 0.0;
  Vec argmin;
};

/// H(x, p) = min_u b(x,u).p + L(x,u) over the simplex mesh, polished on the
/// continuous simplex when the cost is strictly convex.  Ties resolve to the
/// earliest mesh point (e_1 first).
HamiltonianValue hamiltonian(std::span<const double> x, std::span<const double> p, const CostSpec& cost,
                             const DiffusionCoeffs& coeffs, const LimitParams& limits, const SimplexMesh& mesh);

/// Per-solve diagnostics.
struct SolveStats {
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  /// Largest pointwise increase between consecutive policy-iteration values;
  /// policy iteration on a monotone scheme should keep this <= 0.
  double max_value_increase = 0.0;
  double growth_constant = 0.0;
};

class ValueGrid {
 public:
  ValueGrid() = default;
  ValueGrid(GridSpec spec, std::size_t k);

  const GridSpec& spec() const { return spec_; }
  std::size_t k() const { return k_; }
  std::size_t node_count() const { return values_.size(); }
  int points_per_axis() const { return spec_.points_per_axis; }

  std::vector<int> multi_index(std::size_t node) const;
  std::size_t node_of(std::span<const int> idx) const;
  Vec coordinates(std::size_t node) const;
  double coordinate(int idx) const { return -spec_.box_halfwidth + idx * spec_.spacing(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& residual() { return residual_; }
  const std::vector<double>& residual() const { return residual_; }
  std::span<double> policy(std::size_t node) { return {policy_.data() + node * k_, k_}; }
  std::span<const double> policy(std::size_t node) const { return {policy_.data() + node * k_, k_}; }

  /// Multilinear interpolation; points outside the box are clamped onto it.
  double value_at(std::span<const double> x) const;
  Vec policy_at(std::span<const double> x) const;

  SolveStats stats;
  std::uint64_t cost_hash = 0;

 private:
  template <typename Fn>
  void interpolate(std::span<const double> x, Fn&& accumulate) const;

  GridSpec spec_;
  std::size_t k_ = 0;
  std::vector<double> values_;
  std::vector<double> policy_;
  std::vector<double> residual_;
};

/// Structural report from assembling one policy-evaluation matrix.
struct AssemblyCheck {
  bool offdiag_nonpositive = true;
  bool strictly_diagonally_dominant = true;
  double min_dominance_margin = 0.0;
};

/// Assembles and checks the policy-evaluation matrix for the given policy
/// table (flat, k entries per node).  Throws NonMonotoneScheme on failure.
AssemblyCheck check_scheme_monotonicity(const GridSpec& grid, std::span<const double> policy_table,
                                        const CostSpec& cost, const DiffusionCoeffs& coeffs,
                                        const LimitParams& limits);

/// Policy iteration on the truncated box.  Faces use the zero
/// second-normal-derivative closure, and the drift there is differenced
/// inward (an outward drift component is dropped).  Throws NoConvergence or
/// SingularLinearSystem.
ValueGrid solve_hjb(const GridSpec& grid, const CostSpec& cost, const DiffusionCoeffs& coeffs,
                    const LimitParams& limits);

struct ResidualReport {
  double max_interior_residual = 0.0;
  double interior_fraction = 0.0;  // fraction of interior nodes below `threshold`
  std::size_t interior_nodes = 0;
  std::size_t argmax_node = 0;
};

/// Central-difference HJB defect at nodes at least 10% of the box width away
/// from every face.  Writes the per-node defect into vg.residual() (0 in the
/// collar).
ResidualReport residual_report(ValueGrid& vg, const CostSpec& cost, const DiffusionCoeffs& coeffs,
                               const LimitParams& limits, double threshold = 1e-2);

/// Central-difference gradient of the grid values at a node (one-sided on
/// faces).
Vec grid_gradient(const ValueGrid& vg, std::size_t node);

PolicyFn extract_policy_fn(std::shared_ptr<const ValueGrid> vg);

/// h_eps(x) = sum_y d(x,y) h(y) / sum_y d(x,y) over lattice points y of
/// eps Z^k inside the ball B(x, eps sqrt(k)); d is the distance from y to
/// the ball's boundary.
PolicyFn mollify_policy(PolicyFn h, double eps, std::size_t k);

/// Independent single-class oracle: the linear two-point ODE
/// (1/2) r^2 f'' + b(x) f' - gamma f + L(x) = 0 on [-4B, 4B] with Dirichlet
/// data from the polynomial particular solutions of the far-field linear
/// drifts, solved by central differences plus one Richardson step.
class K1Reference {
 public:
  K1Reference(const CostSpec& cost, const DiffusionCoeffs& coeffs, const LimitParams& limits,
              double box_halfwidth, int intervals);

  double operator()(double x) const;
  double lower() const { return xs_.front(); }
  double upper() const { return xs_.back(); }

 private:
  std::vector<double> xs_;
  std::vector<double> values_;
};

K1Reference solve_k1_reference(const CostSpec& cost, const DiffusionCoeffs& coeffs, const LimitParams& limits,
                               double box_halfwidth, int intervals);

/// CSV with '#' metadata lines (k, B, M, cost hash) and one row per node:
/// x_1..x_k, value, u_1..u_k, residual.
void write_value_grid_csv(const ValueGrid& vg, std::ostream& out);
ValueGrid read_value_grid_csv(std::istream& in);

}  // namespace qedlab
