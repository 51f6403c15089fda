#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qedlab/model_params.hpp"

namespace qedlab {

/// Points a/S of the simplex with integer a >= 0, sum a = S.  Ordered so
/// that larger leading components come first: e_1 is point 0.
class SimplexMesh {
 public:
  SimplexMesh(std::size_t k, int resolution);

  std::size_t k() const { return k_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return points_.size() / k_; }
  std::span<const double> point(std::size_t idx) const { return {points_.data() + idx * k_, k_}; }

 private:
  std::size_t k_;
  int resolution_;
  std::vector<double> points_;
};

/// Binomial coefficient C(S+k-1, k-1).
std::size_t simplex_mesh_size(std::size_t k, int resolution);

bool on_simplex(std::span<const double> u, double tol);

/// Clamp negatives to 0 and renormalize; uniform if everything vanished.
Vec project_to_simplex(std::span<const double> u);

using SimplexObjective = std::function<double(std::span<const double>)>;

struct SimplexMin {
  Vec u;
  double value = 0.0;
  std::size_t mesh_index = 0;
};

/// Mesh search with strict improvement (first minimum in mesh order wins).
SimplexMin mesh_argmin(const SimplexMesh& mesh, const SimplexObjective& objective);

/// Pairwise mass-transfer coordinate descent from `start`; each move is a
/// golden-section line search and is accepted only if it strictly lowers the
/// objective.  Intended for convex objectives.
SimplexMin polish_on_simplex(SimplexMin start, const SimplexObjective& objective, int sweeps = 20);

}  // namespace qedlab
