#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qedlab {

using Vec = std::vector<double>;
using IVec = std::vector<std::int64_t>;

/// Limiting (n -> infinity) constants of the multiclass QED system.
struct LimitParams {
  std::size_t k = 0;
  Vec lambda;      // first-order arrival rates, per unit n
  Vec mu;          // service rates
  Vec theta;       // abandonment rates
  Vec lambda_hat;  // second-order arrival terms
  Vec mu_hat;      // second-order service terms
  Vec c2u;         // interarrival squared coefficients of variation
  double gamma = 1.0;

  Vec rho() const;
};

/// Rates of the n-th system.  lambda_n = n*lambda + sqrt(n)*lambda_hat,
/// mu_n = mu + mu_hat/sqrt(n), theta_n = theta.
struct SystemParams {
  std::int64_t n = 0;
  Vec lambda_n;
  Vec mu_n;
  Vec theta_n;
  Vec rho;
  Vec c2u;
  double gamma = 1.0;  // discount rate

  std::size_t k() const { return rho.size(); }
  double sqrt_n() const;
};

struct DiffusionCoeffs {
  Vec r;     // diffusion coefficients
  Vec ell;   // limit drift constants
  double beta = 0.0;  // square-root staffing slack
};

/// Integer state of the n-th system plus cumulative counters used for
/// auditing the flow-balance and routing identities.
struct QueueState {
  IVec phi;  // waiting, per class
  IVec psi;  // in service, per class
  Vec next_arrival;
  double now = 0.0;
  IVec cum_arrivals;
  IVec cum_services;
  IVec cum_abandonments;
  IVec cum_routed;
  Vec int_phi;  // integral of phi over [0, now]
  Vec int_psi;

  explicit QueueState(std::size_t k = 0);

  std::size_t k() const { return phi.size(); }
  IVec x() const;
  std::int64_t total() const;
  std::int64_t busy() const;
  std::int64_t waiting() const;
};

struct RescaledState {
  Vec x_hat;
  Vec phi_hat;
  Vec psi_hat;
};

/// Throws BalanceViolation, NonPositiveRate or NegativeAbandonment.
LimitParams validate_limits(LimitParams raw);

/// Throws RateUnderflow if some lambda_n or mu_n is not positive for this n.
SystemParams build_system(const LimitParams& limits, std::int64_t n);

DiffusionCoeffs diffusion_coeffs(const LimitParams& limits);

RescaledState rescale_state(const QueueState& state, const SystemParams& sys);

/// Diffusion-scale vector of an integer occupancy vector.
Vec rescale_x(std::span<const std::int64_t> x, const SystemParams& sys);

/// Initial state whose rescaled occupancy approximates x.  Queue excess over
/// n is split over the classes with the Theta rounding of an equal split.
QueueState initial_state_for(std::span<const double> x, const SystemParams& sys);

}  // namespace qedlab
