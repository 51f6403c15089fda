#pragma once

#include <cmath>
#include <random>

#include "qedlab/model_params.hpp"

namespace fixtures {

// k=2: lambda=(0.5,0.5), mu=(1,1), theta=(0.5,2), mu_hat=(1,1), beta=1.
inline qedlab::LimitParams canonical() {
  qedlab::LimitParams p;
  p.k = 2;
  p.lambda = {0.5, 0.5};
  p.mu = {1.0, 1.0};
  p.theta = {0.5, 2.0};
  p.lambda_hat = {0.0, 0.0};
  p.mu_hat = {1.0, 1.0};
  p.c2u = {1.0, 1.0};
  p.gamma = 1.0;
  return qedlab::validate_limits(p);
}

inline qedlab::LimitParams single(double theta, double mu_hat = 1.0, double lambda_hat = 0.0) {
  qedlab::LimitParams p;
  p.k = 1;
  p.lambda = {1.0};
  p.mu = {1.0};
  p.theta = {theta};
  p.lambda_hat = {lambda_hat};
  p.mu_hat = {mu_hat};
  p.c2u = {1.0};
  p.gamma = 1.0;
  return qedlab::validate_limits(p);
}

inline qedlab::Vec random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> e(1.0);
  qedlab::Vec u(k);
  double s = 0.0;
  for (double& v : u) s += (v = e(rng));
  for (double& v : u) v /= s;
  return u;
}

}  // namespace fixtures
