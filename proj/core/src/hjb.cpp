#include "qedlab/hjb.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qedlab/error.hpp"

namespace qedlab {

void GridSpec::validate() const {
  if (!(box_halfwidth > 0.0)) throw Error(ErrorKind::InvalidArgument, "box_halfwidth must be positive");
  if (points_per_axis < 16) throw Error(ErrorKind::InvalidArgument, "points_per_axis must be >= 16");
  if (simplex_resolution < 2) throw Error(ErrorKind::InvalidArgument, "simplex_resolution must be >= 2");
  if (!(tol_residual > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol_residual must be positive");
  if (max_policy_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_policy_iters must be >= 1");
  if (defect_sweeps < 0) throw Error(ErrorKind::InvalidArgument, "defect_sweeps must be >= 0");
}

Vec drift(std::span<const double> x, std::span<const double> u, const DiffusionCoeffs& coeffs,
          const LimitParams& limits) {
  const double excess = std::max(std::accumulate(x.begin(), x.end(), 0.0), 0.0);
  Vec b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    b[i] = coeffs.ell[i] + (limits.mu[i] - limits.theta[i]) * excess * u[i] - limits.mu[i] * x[i];
  return b;
}

HamiltonianValue hamiltonian(std::span<const double> x, std::span<const double> p, const CostSpec& cost,
                             const DiffusionCoeffs& coeffs, const LimitParams& limits, const SimplexMesh& mesh) {
  const std::size_t k = x.size();
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  const double excess = std::max(total, 0.0);
  double fixed = 0.0;
  for (std::size_t i = 0; i < k; ++i) fixed += (coeffs.ell[i] - limits.mu[i] * x[i]) * p[i];
  auto objective = [&](std::span<const double> u) {
    double v = fixed;
    for (std::size_t i = 0; i < k; ++i) v += (limits.mu[i] - limits.theta[i]) * excess * u[i] * p[i];
    return v + eval_L_unchecked(cost, x, u);
  };
  SimplexMin best = mesh_argmin(mesh, objective);
  if (cost.smooth_policy_expected() && excess > 0.0) best = polish_on_simplex(std::move(best), objective);
  return {best.value, std::move(best.u)};
}

// ---------------------------------------------------------------------------
// ValueGrid

ValueGrid::ValueGrid(GridSpec spec, std::size_t k) : spec_(spec), k_(k) {
  std::size_t n = 1;
  for (std::size_t d = 0; d < k; ++d) n *= static_cast<std::size_t>(spec.points_per_axis);
  values_.assign(n, 0.0);
  residual_.assign(n, 0.0);
  policy_.assign(n * k, 0.0);
}

std::vector<int> ValueGrid::multi_index(std::size_t node) const {
  std::vector<int> idx(k_);
  const auto m = static_cast<std::size_t>(spec_.points_per_axis);
  for (std::size_t d = 0; d < k_; ++d) {
    idx[d] = static_cast<int>(node % m);
    node /= m;
  }
  return idx;
}

std::size_t ValueGrid::node_of(std::span<const int> idx) const {
  std::size_t node = 0;
  for (std::size_t d = k_; d-- > 0;) node = node * static_cast<std::size_t>(spec_.points_per_axis) + idx[d];
  return node;
}

Vec ValueGrid::coordinates(std::size_t node) const {
  const auto idx = multi_index(node);
  Vec x(k_);
  for (std::size_t d = 0; d < k_; ++d) x[d] = coordinate(idx[d]);
  return x;
}

template <typename Fn>
void ValueGrid::interpolate(std::span<const double> x, Fn&& accumulate) const {
  const int m = spec_.points_per_axis;
  const double dx = spec_.spacing();
  std::vector<int> base(k_);
  Vec frac(k_);
  for (std::size_t d = 0; d < k_; ++d) {
    const double xc = std::clamp(x[d], -spec_.box_halfwidth, spec_.box_halfwidth);
    double s = (xc + spec_.box_halfwidth) / dx;
    int i0 = static_cast<int>(std::floor(s));
    i0 = std::clamp(i0, 0, m - 2);
    base[d] = i0;
    frac[d] = std::clamp(s - i0, 0.0, 1.0);
  }
  std::vector<int> idx(k_);
  const std::size_t corners = std::size_t{1} << k_;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    for (std::size_t d = 0; d < k_; ++d) {
      const bool up = (c >> d) & 1U;
      idx[d] = base[d] + (up ? 1 : 0);
      w *= up ? frac[d] : 1.0 - frac[d];
    }
    if (w == 0.0) continue;
    accumulate(node_of(idx), w);
  }
}

double ValueGrid::value_at(std::span<const double> x) const {
  double v = 0.0;
  interpolate(x, [&](std::size_t node, double w) { v += w * values_[node]; });
  return v;
}

Vec ValueGrid::policy_at(std::span<const double> x) const {
  Vec u(k_, 0.0);
  interpolate(x, [&](std::size_t node, double w) {
    const auto p = policy(node);
    for (std::size_t i = 0; i < k_; ++i) u[i] += w * p[i];
  });
  return project_to_simplex(u);
}

// ---------------------------------------------------------------------------
// Discretization

namespace {

struct Stencil {
  std::size_t k = 0;
  std::size_t nodes = 0;
  double dx = 0.0;
  std::vector<double> coords;              // nodes * k
  std::vector<std::int64_t> plus, minus;   // neighbour per (node, dim) or -1
};

Stencil make_stencil(const GridSpec& grid, std::size_t k) {
  ValueGrid shape(grid, k);
  Stencil s;
  s.k = k;
  s.nodes = shape.node_count();
  s.dx = grid.spacing();
  s.coords.resize(s.nodes * k);
  s.plus.assign(s.nodes * k, -1);
  s.minus.assign(s.nodes * k, -1);
  const int m = grid.points_per_axis;
  std::size_t stride = 1;
  for (std::size_t d = 0; d < k; ++d) {
    for (std::size_t node = 0; node < s.nodes; ++node) {
      const int i = static_cast<int>((node / stride) % static_cast<std::size_t>(m));
      s.coords[node * k + d] = shape.coordinate(i);
      if (i > 0) s.minus[node * k + d] = static_cast<std::int64_t>(node - stride);
      if (i < m - 1) s.plus[node * k + d] = static_cast<std::int64_t>(node + stride);
    }
    stride *= static_cast<std::size_t>(m);
  }
  return s;
}

struct Model {
  const CostSpec& cost;
  const DiffusionCoeffs& coeffs;
  const LimitParams& limits;
  DriftScheme scheme;
  bool central = false;  // plain central differences, no added diffusion
};

// Neighbour weights of one node for control u.  The row of the discrete
// equation is  sum_d a+_d (f+ - f) + a-_d (f- - f) + L - gamma f = 0.
void row_weights(const Stencil& s, const Model& m, std::size_t node, std::span<const double> u, double* a_plus,
                 double* a_minus) {
  const std::size_t k = s.k;
  const double* x = &s.coords[node * k];
  double total = 0.0;
  for (std::size_t d = 0; d < k; ++d) total += x[d];
  const double excess = std::max(total, 0.0);
  const double dx = s.dx;
  for (std::size_t d = 0; d < k; ++d) {
    const double b = m.coeffs.ell[d] + (m.limits.mu[d] - m.limits.theta[d]) * excess * u[d] - m.limits.mu[d] * x[d];
    const bool lo = s.minus[node * k + d] < 0;
    const bool hi = s.plus[node * k + d] < 0;
    if (lo) {
      a_minus[d] = 0.0;
      a_plus[d] = std::max(b, 0.0) / dx;
    } else if (hi) {
      a_plus[d] = 0.0;
      a_minus[d] = std::max(-b, 0.0) / dx;
    } else {
      const double diff = 0.5 * m.coeffs.r[d] * m.coeffs.r[d];
      if (m.scheme == DriftScheme::Upwind) {
        a_plus[d] = diff / (dx * dx) + std::max(b, 0.0) / dx;
        a_minus[d] = diff / (dx * dx) + std::max(-b, 0.0) / dx;
      } else {
        const double c = diff / (dx * dx);
        const double h = 0.5 * b / dx;
        if (!m.central && std::abs(h) >= c) {
          // diffusion raised to |b| dx / 2: exactly the one-sided weights
          a_plus[d] = std::max(b, 0.0) / dx;
          a_minus[d] = std::max(-b, 0.0) / dx;
        } else {
          a_plus[d] = c + h;
          a_minus[d] = c - h;
        }
      }
    }
  }
}

double local_objective(const Stencil& s, const Model& m, std::size_t node, std::span<const double> u,
                       const std::vector<double>& f, double* a_plus, double* a_minus) {
  row_weights(s, m, node, u, a_plus, a_minus);
  const std::size_t k = s.k;
  const double f0 = f[node];
  double v = eval_L_unchecked(m.cost, std::span<const double>(&s.coords[node * k], k), u);
  for (std::size_t d = 0; d < k; ++d) {
    const auto p = s.plus[node * k + d];
    const auto q = s.minus[node * k + d];
    if (p >= 0) v += a_plus[d] * (f[static_cast<std::size_t>(p)] - f0);
    if (q >= 0) v += a_minus[d] * (f[static_cast<std::size_t>(q)] - f0);
  }
  return v;
}

struct Assembly {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  AssemblyCheck check;
};

Assembly assemble(const Stencil& s, const Model& m, std::span<const double> policy) {
  const std::size_t k = s.k;
  const double gamma = m.limits.gamma;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(s.nodes * (2 * k + 1));
  Assembly out;
  out.rhs.resize(static_cast<Eigen::Index>(s.nodes));
  out.check.min_dominance_margin = std::numeric_limits<double>::infinity();
  std::vector<double> ap(k), am(k);
  for (std::size_t node = 0; node < s.nodes; ++node) {
    const auto u = policy.subspan(node * k, k);
    row_weights(s, m, node, u, ap.data(), am.data());
    double diag = gamma;
    double off = 0.0;
    const auto row = static_cast<Eigen::Index>(node);
    for (std::size_t d = 0; d < k; ++d) {
      if (ap[d] < 0.0 || am[d] < 0.0) out.check.offdiag_nonpositive = false;
      const auto p = s.plus[node * k + d];
      const auto q = s.minus[node * k + d];
      // Explicit zeros keep the sparsity pattern fixed across iterations.
      if (p >= 0) {
        triplets.emplace_back(row, static_cast<Eigen::Index>(p), -ap[d]);
        diag += ap[d];
        off += std::abs(ap[d]);
      }
      if (q >= 0) {
        triplets.emplace_back(row, static_cast<Eigen::Index>(q), -am[d]);
        diag += am[d];
        off += std::abs(am[d]);
      }
    }
    triplets.emplace_back(row, row, diag);
    const double margin = diag - off;
    out.check.min_dominance_margin = std::min(out.check.min_dominance_margin, margin);
    if (!(margin > 0.0)) out.check.strictly_diagonally_dominant = false;
    out.rhs[row] = eval_L_unchecked(m.cost, std::span<const double>(&s.coords[node * k], k), u);
  }
  out.matrix.resize(static_cast<Eigen::Index>(s.nodes), static_cast<Eigen::Index>(s.nodes));
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  return out;
}

void require_monotone(const AssemblyCheck& check) {
  if (!check.offdiag_nonpositive)
    throw Error(ErrorKind::NonMonotoneScheme, "policy-evaluation matrix has a positive off-diagonal entry");
  if (!check.strictly_diagonally_dominant)
    throw Error(ErrorKind::NonMonotoneScheme, "policy-evaluation matrix is not strictly diagonally dominant");
}

}  // namespace

AssemblyCheck check_scheme_monotonicity(const GridSpec& grid, std::span<const double> policy_table,
                                        const CostSpec& cost, const DiffusionCoeffs& coeffs,
                                        const LimitParams& limits) {
  const Stencil s = make_stencil(grid, limits.k);
  if (policy_table.size() != s.nodes * limits.k)
    throw Error(ErrorKind::InvalidArgument, "policy table does not match the grid");
  const Model m{cost, coeffs, limits, grid.scheme};
  Assembly a = assemble(s, m, policy_table);
  require_monotone(a.check);
  return a.check;
}

ValueGrid solve_hjb(const GridSpec& grid, const CostSpec& cost, const DiffusionCoeffs& coeffs,
                    const LimitParams& limits) {
  grid.validate();
  if (!(limits.gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  const std::size_t k = limits.k;
  if (k > 3)
    std::cerr << "warning: dense HJB grids with k=" << k << " classes are expensive; k <= 3 is the practical limit\n";

  const Stencil s = make_stencil(grid, k);
  const Model model{cost, coeffs, limits, grid.scheme};
  const Model central{cost, coeffs, limits, grid.scheme, true};
  const bool correct = grid.scheme == DriftScheme::Hybrid && grid.defect_sweeps > 0;
  const Model& improve = correct ? central : model;
  const SimplexMesh mesh(k, grid.simplex_resolution);
  const bool polish = cost.smooth_policy_expected();

  ValueGrid vg(grid, k);
  vg.cost_hash = cost.hash();

  // Initial policy: minimize the running cost alone.
  for (std::size_t node = 0; node < s.nodes; ++node) {
    const std::span<const double> x(&s.coords[node * k], k);
    SimplexMin best = mesh_argmin(mesh, [&](std::span<const double> u) { return eval_L_unchecked(cost, x, u); });
    std::copy(best.u.begin(), best.u.end(), vg.policy(node).begin());
  }

  std::vector<double> policy_table(s.nodes * k);
  auto load_policy = [&] {
    for (std::size_t node = 0; node < s.nodes; ++node) {
      const auto u = vg.policy(node);
      std::copy(u.begin(), u.end(), policy_table.begin() + static_cast<std::ptrdiff_t>(node * k));
    }
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  bool analyzed = false;
  std::vector<double>& f = vg.values();
  std::vector<double> previous;
  std::vector<double> ap(k), am(k);
  SolveStats stats;

  for (int iter = 0; iter < grid.max_policy_iters; ++iter) {
    load_policy();
    Assembly a = assemble(s, model, policy_table);
    require_monotone(a.check);
    if (!analyzed) {
      solver.analyzePattern(a.matrix);
      analyzed = true;
    }
    solver.factorize(a.matrix);
    if (solver.info() != Eigen::Success)
      throw Error(ErrorKind::SingularLinearSystem, "sparse LU factorization failed: " + solver.lastErrorMessage());
    Eigen::VectorXd sol = solver.solve(a.rhs);
    if (solver.info() != Eigen::Success || !sol.allFinite())
      throw Error(ErrorKind::SingularLinearSystem, "sparse LU solve failed");
    if (correct) {
      // Defect correction toward the central-difference equations, reusing
      // the monotone factorization as the preconditioner.
      Assembly c = assemble(s, central, policy_table);
      for (int sweep = 0; sweep < grid.defect_sweeps; ++sweep) {
        const Eigen::VectorXd defect = c.rhs - c.matrix * sol;
        if (defect.lpNorm<Eigen::Infinity>() < 0.1 * grid.tol_residual) break;
        const Eigen::VectorXd delta = solver.solve(defect);
        if (!delta.allFinite()) throw Error(ErrorKind::SingularLinearSystem, "defect correction diverged");
        sol += delta;
      }
    }
    for (std::size_t node = 0; node < s.nodes; ++node) f[node] = sol[static_cast<Eigen::Index>(node)];
    stats.iterations = iter + 1;

    if (!previous.empty()) {
      double change = 0.0;
      for (std::size_t node = 0; node < s.nodes; ++node) {
        change = std::max(change, std::abs(f[node] - previous[node]));
        stats.max_value_increase = std::max(stats.max_value_increase, f[node] - previous[node]);
      }
      stats.last_change = change;
      if (change < grid.tol_residual) {
        stats.converged = true;
        break;
      }
    }
    previous = f;

    // Jacobi-style improvement: every node reads the same iterate f.
    std::size_t switched = 0;
    for (std::size_t node = 0; node < s.nodes; ++node) {
      auto objective = [&](std::span<const double> u) {
        return local_objective(s, improve, node, u, f, ap.data(), am.data());
      };
      const double current = objective(vg.policy(node));
      SimplexMin best = mesh_argmin(mesh, objective);
      if (polish) best = polish_on_simplex(std::move(best), objective);
      if (best.value < current - 1e-12 * (1.0 + std::abs(current))) {
        std::copy(best.u.begin(), best.u.end(), vg.policy(node).begin());
        ++switched;
      }
    }
    if (switched == 0) {
      stats.converged = true;
      stats.last_change = 0.0;
      break;
    }
  }
  if (!stats.converged) {
    std::ostringstream os;
    os << "policy iteration stopped after " << stats.iterations << " iterations, last value change "
       << stats.last_change;
    throw Error(ErrorKind::NoConvergence, os.str());
  }

  const int degree = std::max(cost.growth_degree, 1);
  for (std::size_t node = 0; node < s.nodes; ++node) {
    double norm = 0.0;
    for (std::size_t d = 0; d < k; ++d) norm += s.coords[node * k + d] * s.coords[node * k + d];
    stats.growth_constant =
        std::max(stats.growth_constant, std::abs(f[node]) / (1.0 + std::pow(std::sqrt(norm), degree)));
  }
  vg.stats = stats;
  residual_report(vg, cost, coeffs, limits);
  return vg;
}

Vec grid_gradient(const ValueGrid& vg, std::size_t node) {
  const std::size_t k = vg.k();
  const double dx = vg.spec().spacing();
  const int m = vg.points_per_axis();
  auto idx = vg.multi_index(node);
  Vec g(k);
  const auto& f = vg.values();
  for (std::size_t d = 0; d < k; ++d) {
    auto up = idx, down = idx;
    double h = 2.0 * dx;
    if (idx[d] == 0) {
      up[d] += 1;
      h = dx;
    } else if (idx[d] == m - 1) {
      down[d] -= 1;
      h = dx;
    } else {
      up[d] += 1;
      down[d] -= 1;
    }
    g[d] = (f[vg.node_of(up)] - f[vg.node_of(down)]) / h;
  }
  return g;
}

ResidualReport residual_report(ValueGrid& vg, const CostSpec& cost, const DiffusionCoeffs& coeffs,
                               const LimitParams& limits, double threshold) {
  const std::size_t k = vg.k();
  const double dx = vg.spec().spacing();
  const double collar = 0.1 * 2.0 * vg.spec().box_halfwidth;
  const SimplexMesh mesh(k, vg.spec().simplex_resolution);
  const auto& f = vg.values();
  auto& res = vg.residual();
  res.assign(vg.node_count(), 0.0);

  ResidualReport report;
  std::size_t below = 0;
  for (std::size_t node = 0; node < vg.node_count(); ++node) {
    const Vec x = vg.coordinates(node);
    bool interior = true;
    for (double xd : x)
      if (vg.spec().box_halfwidth - std::abs(xd) < collar - 1e-12) interior = false;
    if (!interior) continue;
    const auto idx = vg.multi_index(node);
    Vec p(k);
    double diffusion = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
      auto up = idx, down = idx;
      up[d] += 1;
      down[d] -= 1;
      const double fu = f[vg.node_of(up)];
      const double fd = f[vg.node_of(down)];
      p[d] = (fu - fd) / (2.0 * dx);
      diffusion += 0.5 * coeffs.r[d] * coeffs.r[d] * (fu - 2.0 * f[node] + fd) / (dx * dx);
    }
    const HamiltonianValue h = hamiltonian(x, p, cost, coeffs, limits, mesh);
    const double defect = std::abs(diffusion + h.value - limits.gamma * f[node]);
    res[node] = defect;
    ++report.interior_nodes;
    if (defect < threshold) ++below;
    if (defect > report.max_interior_residual) {
      report.max_interior_residual = defect;
      report.argmax_node = node;
    }
  }
  report.interior_fraction =
      report.interior_nodes ? static_cast<double>(below) / static_cast<double>(report.interior_nodes) : 0.0;
  return report;
}

PolicyFn extract_policy_fn(std::shared_ptr<const ValueGrid> vg) {
  return [vg = std::move(vg)](std::span<const double> x) { return vg->policy_at(x); };
}

PolicyFn mollify_policy(PolicyFn h, double eps, std::size_t k) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "mollifier width must be positive");
  return [h = std::move(h), eps, k](std::span<const double> x) {
    const double radius = eps * std::sqrt(static_cast<double>(k));
    std::vector<long> lo(k), hi(k), cur(k);
    for (std::size_t d = 0; d < k; ++d) {
      lo[d] = static_cast<long>(std::ceil((x[d] - radius) / eps));
      hi[d] = static_cast<long>(std::floor((x[d] + radius) / eps));
      cur[d] = lo[d];
    }
    Vec acc(k, 0.0), y(k);
    double weight_sum = 0.0;
    while (true) {
      double dist2 = 0.0;
      for (std::size_t d = 0; d < k; ++d) {
        y[d] = static_cast<double>(cur[d]) * eps;
        dist2 += (y[d] - x[d]) * (y[d] - x[d]);
      }
      const double w = radius - std::sqrt(dist2);
      if (w > 0.0) {
        const Vec u = h(y);
        for (std::size_t i = 0; i < k; ++i) acc[i] += w * u[i];
        weight_sum += w;
      }
      std::size_t d = 0;
      while (d < k && ++cur[d] > hi[d]) {
        cur[d] = lo[d];
        ++d;
      }
      if (d == k) break;
    }
    if (!(weight_sum > 0.0)) throw Error(ErrorKind::InvariantBreach, "mollifier stencil is empty");
    for (double& a : acc) a /= weight_sum;
    return project_to_simplex(acc);
  };
}

// ---------------------------------------------------------------------------
// Single-class reference solution

namespace {

// Coefficients (ascending powers) of L(x, 1) on one side of the origin.
Vec one_sided_polynomial(const CostSpec& cost, bool positive_side) {
  Vec poly(1, cost.offset);
  auto add = [&poly](std::size_t degree, double c) {
    if (poly.size() <= degree) poly.resize(degree + 1, 0.0);
    poly[degree] += c;
  };
  switch (cost.kind) {
    case CostKind::PowerQueue: {
      if (!positive_side) break;
      const double p = cost.powers[0];
      if (p != std::floor(p))
        throw Error(ErrorKind::UnsupportedSpec, "single-class oracle needs integer cost powers");
      add(static_cast<std::size_t>(p), cost.coeffs[0]);
      break;
    }
    case CostKind::LinearQueue:
      if (positive_side) add(1, cost.coeffs[0]);
      break;
    case CostKind::Abandonment:
      if (positive_side) add(1, cost.coeffs[0] * cost.theta[0]);
      break;
    case CostKind::Idling:
      if (!positive_side) add(1, -1.0);
      break;
    case CostKind::CustomersInSystem:
      add(1, cost.coeffs[0]);
      break;
    case CostKind::WeightedSum:
      for (const auto& t : cost.terms) {
        const Vec sub = one_sided_polynomial(t, positive_side);
        for (std::size_t j = 0; j < sub.size(); ++j) add(j, sub[j]);
      }
      break;
    case CostKind::Custom:
      throw Error(ErrorKind::UnsupportedSpec, "single-class oracle does not support custom costs");
  }
  return poly;
}

// Polynomial solution of (r^2/2) f'' + (ell - kappa x) f' - gamma f + L = 0.
double particular_solution(const Vec& poly, double r, double ell, double kappa, double gamma, double x) {
  const std::size_t n = poly.size();
  Vec c(n + 2, 0.0);
  for (std::size_t jj = n; jj-- > 0;) {
    const double j = static_cast<double>(jj);
    c[jj] = (poly[jj] + 0.5 * r * r * (j + 2.0) * (j + 1.0) * c[jj + 2] + ell * (j + 1.0) * c[jj + 1]) /
            (kappa * j + gamma);
  }
  double v = 0.0;
  for (std::size_t jj = n; jj-- > 0;) v = v * x + c[jj];
  return v;
}

std::vector<double> solve_two_point(const CostSpec& cost, const DiffusionCoeffs& coeffs, const LimitParams& limits,
                                    double lo, double hi, int intervals) {
  const double r = coeffs.r[0];
  const double ell = coeffs.ell[0];
  const double mu = limits.mu[0];
  const double theta = limits.theta[0];
  const double gamma = limits.gamma;
  const double h = (hi - lo) / intervals;
  const std::size_t n = static_cast<std::size_t>(intervals) + 1;

  const Vec left_poly = one_sided_polynomial(cost, false);
  const Vec right_poly = one_sided_polynomial(cost, true);
  std::vector<double> f(n);
  f.front() = particular_solution(left_poly, r, ell, mu, gamma, lo);
  f.back() = particular_solution(right_poly, r, ell, theta, gamma, hi);

  // Tridiagonal system for interior nodes: a f_{j-1} + b f_j + c f_{j+1} = d.
  const std::size_t m = n - 2;
  std::vector<double> sub(m), diag(m), sup(m), rhs(m);
  const double one[1] = {1.0};
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double x = lo + static_cast<double>(j) * h;
    const double xs[1] = {x};
    const double b = ell + (mu - theta) * std::max(x, 0.0) - mu * x;
    double diff = 0.5 * r * r;
    diff = std::max(diff, 0.5 * std::abs(b) * h);
    const double wp = diff / (h * h) + 0.5 * b / h;
    const double wm = diff / (h * h) - 0.5 * b / h;
    const std::size_t row = j - 1;
    sub[row] = wm;
    sup[row] = wp;
    diag[row] = -(wp + wm + gamma);
    rhs[row] = -eval_L_unchecked(cost, xs, one);
  }
  rhs.front() -= sub.front() * f.front();
  rhs.back() -= sup.back() * f.back();
  // Thomas algorithm.
  for (std::size_t i = 1; i < m; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  f[m] = rhs[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) f[i + 1] = (rhs[i] - sup[i] * f[i + 2]) / diag[i];
  return f;
}

}  // namespace

K1Reference::K1Reference(const CostSpec& cost, const DiffusionCoeffs& coeffs, const LimitParams& limits,
                         double box_halfwidth, int intervals) {
  if (limits.k != 1) throw Error(ErrorKind::InvalidArgument, "single-class oracle requires k = 1");
  if (intervals < 4) throw Error(ErrorKind::InvalidArgument, "oracle needs at least 4 intervals");
  const double lo = -4.0 * box_halfwidth;
  const double hi = 4.0 * box_halfwidth;
  const auto coarse = solve_two_point(cost, coeffs, limits, lo, hi, intervals);
  const auto fine = solve_two_point(cost, coeffs, limits, lo, hi, 2 * intervals);
  xs_.resize(coarse.size());
  values_.resize(coarse.size());
  const double h = (hi - lo) / intervals;
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    xs_[j] = lo + static_cast<double>(j) * h;
    values_[j] = (4.0 * fine[2 * j] - coarse[j]) / 3.0;
  }
}

double K1Reference::operator()(double x) const {
  const double h = xs_[1] - xs_[0];
  const double s = (std::clamp(x, xs_.front(), xs_.back()) - xs_.front()) / h;
  const auto j = std::min(static_cast<std::size_t>(s), xs_.size() - 2);
  const double t = s - static_cast<double>(j);
  return (1.0 - t) * values_[j] + t * values_[j + 1];
}

K1Reference solve_k1_reference(const CostSpec& cost, const DiffusionCoeffs& coeffs, const LimitParams& limits,
                               double box_halfwidth, int intervals) {
  return K1Reference(cost, coeffs, limits, box_halfwidth, intervals);
}

// ---------------------------------------------------------------------------
// Serialization

void write_value_grid_csv(const ValueGrid& vg, std::ostream& out) {
  const std::size_t k = vg.k();
  out << "# k=" << k << "\n";
  out << std::setprecision(17);
  out << "# B=" << vg.spec().box_halfwidth << "\n";
  out << "# M=" << vg.spec().points_per_axis << "\n";
  out << "# S=" << vg.spec().simplex_resolution << "\n";
  out << "# cost_hash=" << std::hex << vg.cost_hash << std::dec << "\n";
  for (std::size_t d = 0; d < k; ++d) out << "x" << d + 1 << ",";
  out << "value,";
  for (std::size_t d = 0; d < k; ++d) out << "u" << d + 1 << ",";
  out << "residual\n";
  for (std::size_t node = 0; node < vg.node_count(); ++node) {
    const Vec x = vg.coordinates(node);
    for (double xd : x) out << xd << ",";
    out << vg.values()[node] << ",";
    for (double u : vg.policy(node)) out << u << ",";
    out << vg.residual()[node] << "\n";
  }
}

ValueGrid read_value_grid_csv(std::istream& in) {
  std::string line;
  std::size_t k = 0;
  GridSpec spec;
  std::uint64_t hash = 0;
  while (in.peek() == '#' && std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(2, eq - 2);
    const std::string val = line.substr(eq + 1);
    if (key == "k") k = std::stoul(val);
    else if (key == "B") spec.box_halfwidth = std::stod(val);
    else if (key == "M") spec.points_per_axis = std::stoi(val);
    else if (key == "S") spec.simplex_resolution = std::stoi(val);
    else if (key == "cost_hash") hash = std::stoull(val, nullptr, 16);
  }
  if (k == 0) throw Error(ErrorKind::IoError, "value grid file lacks a k= header");
  std::getline(in, line);  // column names
  ValueGrid vg(spec, k);
  vg.cost_hash = hash;
  for (std::size_t node = 0; node < vg.node_count(); ++node) {
    if (!std::getline(in, line)) throw Error(ErrorKind::IoError, "value grid file is truncated");
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != 2 * k + 2) throw Error(ErrorKind::IoError, "malformed value grid row");
    vg.values()[node] = cells[k];
    for (std::size_t d = 0; d < k; ++d) vg.policy(node)[d] = cells[k + 1 + d];
    vg.residual()[node] = cells[2 * k + 1];
  }
  return vg;
}

}  // namespace qedlab
