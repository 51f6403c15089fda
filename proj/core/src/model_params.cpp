#include "qedlab/model_params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qedlab/error.hpp"
#include "qedlab/policies.hpp"

namespace qedlab {

Vec LimitParams::rho() const {
  Vec out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = lambda[i] / mu[i];
  return out;
}

double SystemParams::sqrt_n() const { return std::sqrt(static_cast<double>(n)); }

QueueState::QueueState(std::size_t k)
    : phi(k, 0),
      psi(k, 0),
      next_arrival(k, 0.0),
      cum_arrivals(k, 0),
      cum_services(k, 0),
      cum_abandonments(k, 0),
      cum_routed(k, 0),
      int_phi(k, 0.0),
      int_psi(k, 0.0) {}

IVec QueueState::x() const {
  IVec out(k());
  for (std::size_t i = 0; i < k(); ++i) out[i] = phi[i] + psi[i];
  return out;
}

std::int64_t QueueState::total() const { return waiting() + busy(); }
std::int64_t QueueState::busy() const { return std::accumulate(psi.begin(), psi.end(), std::int64_t{0}); }
std::int64_t QueueState::waiting() const { return std::accumulate(phi.begin(), phi.end(), std::int64_t{0}); }

LimitParams validate_limits(LimitParams raw) {
  const std::size_t k = raw.k;
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "class count must be >= 1");
  auto check_len = [k](const Vec& v, const char* name) {
    if (v.size() != k) {
      std::ostringstream os;
      os << name << " has " << v.size() << " entries, expected " << k;
      throw Error(ErrorKind::InvalidArgument, os.str());
    }
  };
  check_len(raw.lambda, "lambda");
  check_len(raw.mu, "mu");
  check_len(raw.theta, "theta");
  check_len(raw.lambda_hat, "lambda_hat");
  check_len(raw.mu_hat, "mu_hat");
  check_len(raw.c2u, "c2u");

  for (std::size_t i = 0; i < k; ++i) {
    if (!(raw.lambda[i] > 0.0) || !(raw.mu[i] > 0.0))
      throw Error(ErrorKind::NonPositiveRate, "lambda and mu must be positive (class " + std::to_string(i + 1) + ")");
    if (!(raw.theta[i] >= 0.0))
      throw Error(ErrorKind::NegativeAbandonment, "theta must be >= 0 (class " + std::to_string(i + 1) + ")");
    if (!(raw.c2u[i] >= 0.0)) throw Error(ErrorKind::InvalidArgument, "c2u must be >= 0");
  }
  if (!(raw.gamma > 0.0)) throw Error(ErrorKind::NonPositiveRate, "discount rate gamma must be positive");

  const Vec rho = raw.rho();
  const double total = std::accumulate(rho.begin(), rho.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "sum of lambda_i/mu_i is " << total << ", must equal 1";
    throw Error(ErrorKind::BalanceViolation, os.str());
  }
  return raw;
}

SystemParams build_system(const LimitParams& limits, std::int64_t n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "server count n must be >= 1");
  SystemParams sys;
  sys.n = n;
  const double dn = static_cast<double>(n);
  const double sn = std::sqrt(dn);
  sys.lambda_n.resize(limits.k);
  sys.mu_n.resize(limits.k);
  sys.theta_n = limits.theta;
  sys.rho = limits.rho();
  sys.c2u = limits.c2u;
  sys.gamma = limits.gamma;
  for (std::size_t i = 0; i < limits.k; ++i) {
    sys.lambda_n[i] = dn * limits.lambda[i] + sn * limits.lambda_hat[i];
    sys.mu_n[i] = limits.mu[i] + limits.mu_hat[i] / sn;
    if (!(sys.lambda_n[i] > 0.0) || !(sys.mu_n[i] > 0.0)) {
      std::ostringstream os;
      os << "class " << i + 1 << " has lambda_n=" << sys.lambda_n[i] << ", mu_n=" << sys.mu_n[i] << " at n=" << n;
      throw Error(ErrorKind::RateUnderflow, os.str());
    }
  }
  return sys;
}

DiffusionCoeffs diffusion_coeffs(const LimitParams& limits) {
  DiffusionCoeffs out;
  out.r.resize(limits.k);
  out.ell.resize(limits.k);
  const Vec rho = limits.rho();
  for (std::size_t i = 0; i < limits.k; ++i) {
    out.r[i] = std::sqrt(limits.lambda[i] * limits.c2u[i] + limits.lambda[i]);
    out.ell[i] = limits.lambda_hat[i] - rho[i] * limits.mu_hat[i];
    out.beta -= out.ell[i] / limits.mu[i];
  }
  return out;
}

Vec rescale_x(std::span<const std::int64_t> x, const SystemParams& sys) {
  const double sn = sys.sqrt_n();
  const double dn = static_cast<double>(sys.n);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (static_cast<double>(x[i]) - sys.rho[i] * dn) / sn;
  return out;
}

RescaledState rescale_state(const QueueState& state, const SystemParams& sys) {
  const std::size_t k = state.k();
  const double sn = sys.sqrt_n();
  const double dn = static_cast<double>(sys.n);
  RescaledState out{Vec(k), Vec(k), Vec(k)};
  for (std::size_t i = 0; i < k; ++i) {
    out.phi_hat[i] = static_cast<double>(state.phi[i]) / sn;
    out.psi_hat[i] = (static_cast<double>(state.psi[i]) - sys.rho[i] * dn) / sn;
    out.x_hat[i] = out.phi_hat[i] + out.psi_hat[i];
  }
  return out;
}

QueueState initial_state_for(std::span<const double> x, const SystemParams& sys) {
  const std::size_t k = sys.k();
  if (x.size() != k) throw Error(ErrorKind::InvalidArgument, "initial point has wrong dimension");
  const double sn = sys.sqrt_n();
  const double dn = static_cast<double>(sys.n);

  IVec occupancy(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double target = std::round(sys.rho[i] * dn + sn * x[i]);
    occupancy[i] = std::max<std::int64_t>(0, static_cast<std::int64_t>(target));
  }
  const std::int64_t total = std::accumulate(occupancy.begin(), occupancy.end(), std::int64_t{0});

  QueueState state(k);
  const std::int64_t excess = std::max<std::int64_t>(0, total - sys.n);
  if (excess > 0) {
    Vec share(k, static_cast<double>(excess) / static_cast<double>(k));
    IVec queue = theta_round(share);
    // A class cannot queue more customers than it has; push any overflow to
    // the other classes, highest index first.
    std::int64_t overflow = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (queue[i] > occupancy[i]) {
        overflow += queue[i] - occupancy[i];
        queue[i] = occupancy[i];
      }
    }
    for (std::size_t j = k; j-- > 0 && overflow > 0;) {
      const std::int64_t room = occupancy[j] - queue[j];
      const std::int64_t moved = std::min(room, overflow);
      queue[j] += moved;
      overflow -= moved;
    }
    state.phi = queue;
  }
  for (std::size_t i = 0; i < k; ++i) state.psi[i] = occupancy[i] - state.phi[i];
  return state;
}

}  // namespace qedlab
