#include "qedlab/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qedlab/error.hpp"

namespace qedlab {

namespace {

void enumerate(std::size_t k, int remaining, std::size_t pos, std::vector<int>& current, std::vector<double>& out,
               int resolution) {
  if (pos + 1 == k) {
    current[pos] = remaining;
    for (int a : current) out.push_back(static_cast<double>(a) / resolution);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    current[pos] = a;
    enumerate(k, remaining - a, pos + 1, current, out, resolution);
  }
}

}  // namespace

std::size_t simplex_mesh_size(std::size_t k, int resolution) {
  // C(S+k-1, k-1)
  std::size_t n = static_cast<std::size_t>(resolution) + k - 1;
  std::size_t r = k - 1;
  std::size_t out = 1;
  for (std::size_t i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

SimplexMesh::SimplexMesh(std::size_t k, int resolution) : k_(k), resolution_(resolution) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "simplex dimension must be >= 1");
  if (resolution < 1) throw Error(ErrorKind::InvalidArgument, "simplex resolution must be >= 1");
  std::vector<int> current(k, 0);
  points_.reserve(simplex_mesh_size(k, resolution) * k);
  enumerate(k, resolution, 0, current, points_, resolution);
}

bool on_simplex(std::span<const double> u, double tol) {
  double total = 0.0;
  for (double ui : u) {
    if (!(ui >= -tol)) return false;
    total += ui;
  }
  return std::abs(total - 1.0) <= tol;
}

Vec project_to_simplex(std::span<const double> u) {
  Vec out(u.begin(), u.end());
  double total = 0.0;
  for (double& ui : out) {
    ui = std::max(ui, 0.0);
    total += ui;
  }
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (double& ui : out) ui /= total;
  return out;
}

SimplexMin mesh_argmin(const SimplexMesh& mesh, const SimplexObjective& objective) {
  SimplexMin best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < mesh.size(); ++m) {
    const double v = objective(mesh.point(m));
    if (v < best.value) {
      best.value = v;
      best.mesh_index = m;
    }
  }
  auto p = mesh.point(best.mesh_index);
  best.u.assign(p.begin(), p.end());
  return best;
}

SimplexMin polish_on_simplex(SimplexMin start, const SimplexObjective& objective, int sweeps) {
  const std::size_t k = start.u.size();
  if (k < 2) return start;
  constexpr double kGolden = 0.6180339887498949;
  Vec trial = start.u;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    bool moved = false;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        // Move t from j to i: u_i + t, u_j - t, t in [-u_i, u_j].
        double lo = -start.u[i];
        double hi = start.u[j];
        if (hi - lo < 1e-14) continue;
        auto at = [&](double t) {
          trial = start.u;
          trial[i] += t;
          trial[j] -= t;
          trial[i] = std::max(trial[i], 0.0);
          trial[j] = std::max(trial[j], 0.0);
          return objective(trial);
        };
        double a = hi - kGolden * (hi - lo);
        double b = lo + kGolden * (hi - lo);
        double fa = at(a), fb = at(b);
        for (int it = 0; it < 40 && hi - lo > 1e-12; ++it) {
          if (fa <= fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - kGolden * (hi - lo);
            fa = at(a);
          } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + kGolden * (hi - lo);
            fb = at(b);
          }
        }
        double t = 0.5 * (lo + hi);
        double ft = at(t);
        // Endpoints matter for convex problems whose minimum sits on a face.
        for (double edge : {-start.u[i], start.u[j]}) {
          const double fe = at(edge);
          if (fe < ft) {
            ft = fe;
            t = edge;
          }
        }
        if (ft < start.value) {
          start.u[i] = std::max(start.u[i] + t, 0.0);
          start.u[j] = std::max(start.u[j] - t, 0.0);
          start.value = ft;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  return start;
}

}  // namespace qedlab
