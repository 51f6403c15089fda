#include "qedlab/cost.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qedlab/error.hpp"

namespace qedlab {

namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void check_simplex(std::span<const double> u) {
  double total = 0.0;
  for (double ui : u) {
    if (ui < -1e-12) throw Error(ErrorKind::SimplexViolation, "control has a negative component");
    total += ui;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::SimplexViolation, "control components do not sum to 1");
}

// L(x, u) without building (phi, psi).  `excess` is (1.x)^+.
double eval_L_direct(const CostSpec& spec, std::span<const double> x, std::span<const double> u, double total) {
  const double excess = std::max(total, 0.0);
  double value = spec.offset;
  switch (spec.kind) {
    case CostKind::PowerQueue:
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double q = excess * u[i];
        const double p = spec.powers[i];
        value += spec.coeffs[i] * (p == 2.0 ? q * q : (p == 1.0 ? q : std::pow(q, p)));
      }
      return value;
    case CostKind::LinearQueue:
      for (std::size_t i = 0; i < u.size(); ++i) value += spec.coeffs[i] * excess * u[i];
      return value;
    case CostKind::Abandonment:
      for (std::size_t i = 0; i < u.size(); ++i) value += spec.coeffs[i] * spec.theta[i] * excess * u[i];
      return value;
    case CostKind::Idling:
      return value + std::max(-total, 0.0);
    case CostKind::CustomersInSystem:
      for (std::size_t i = 0; i < x.size(); ++i) value += spec.coeffs[i] * x[i];
      return value;
    case CostKind::WeightedSum:
      for (const auto& term : spec.terms) value += eval_L_direct(term, x, u, total);
      return value;
    case CostKind::Custom: {
      Vec phi(u.size()), psi(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        phi[i] = excess * u[i];
        psi[i] = x[i] - phi[i];
      }
      return value + spec.custom(phi, psi);
    }
  }
  return value;
}

CostSpec base(CostKind kind, Vec coeffs) {
  CostSpec spec;
  spec.kind = kind;
  spec.coeffs = std::move(coeffs);
  return spec;
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool CostSpec::is_catalog() const {
  if (kind == CostKind::Custom) return false;
  if (kind == CostKind::WeightedSum)
    return std::all_of(terms.begin(), terms.end(), [](const CostSpec& t) { return t.is_catalog(); });
  return true;
}

bool CostSpec::smooth_policy_expected() const {
  if (kind != CostKind::PowerQueue) return false;
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    if (!(powers[i] >= 2.0) || !(coeffs[i] > 0.0)) return false;
  return true;
}

std::string CostSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  auto list = [&os](const Vec& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ']';
  };
  switch (kind) {
    case CostKind::PowerQueue: os << "power_queue(c="; list(coeffs); os << ",p="; list(powers); os << ')'; break;
    case CostKind::LinearQueue: os << "linear_queue(c="; list(coeffs); os << ')'; break;
    case CostKind::Abandonment: os << "abandonment(c="; list(coeffs); os << ",theta="; list(theta); os << ')'; break;
    case CostKind::Idling: os << "idling(k=" << coeffs.size() << ')'; break;
    case CostKind::CustomersInSystem: os << "customers_in_system(c="; list(coeffs); os << ')'; break;
    case CostKind::WeightedSum:
      os << "sum(";
      for (std::size_t i = 0; i < terms.size(); ++i) os << (i ? "+" : "") << terms[i].describe();
      os << ')';
      break;
    case CostKind::Custom: os << "custom(" << id << ')'; break;
  }
  if (offset != 0.0) os << "+" << offset;
  return os.str();
}

std::uint64_t CostSpec::hash() const { return fnv1a(describe()); }

CostSpec power_queue_cost(Vec coeffs, Vec powers) {
  if (coeffs.size() != powers.size()) throw Error(ErrorKind::InvalidArgument, "coeffs/powers length mismatch");
  const double k = static_cast<double>(coeffs.size());
  CostSpec spec = base(CostKind::PowerQueue, std::move(coeffs));
  spec.powers = std::move(powers);
  double degree = 1.0;
  spec.growth_constant = 0.0;
  for (std::size_t i = 0; i < spec.coeffs.size(); ++i) {
    if (spec.powers[i] < 1.0) throw Error(ErrorKind::InvalidArgument, "powers must be >= 1");
    if (spec.coeffs[i] < 0.0) throw Error(ErrorKind::InvalidArgument, "coefficients must be >= 0");
    degree = std::max(degree, spec.powers[i]);
    spec.growth_constant += spec.coeffs[i] * std::pow(k, spec.powers[i] / 2.0);
  }
  spec.growth_degree = static_cast<int>(std::ceil(degree));
  return spec;
}

CostSpec linear_queue_cost(Vec coeffs) {
  const double k = static_cast<double>(coeffs.size());
  CostSpec spec = base(CostKind::LinearQueue, std::move(coeffs));
  spec.growth_constant = std::sqrt(k) * std::accumulate(spec.coeffs.begin(), spec.coeffs.end(), 0.0);
  return spec;
}

CostSpec abandonment_cost(Vec coeffs, Vec theta) {
  if (coeffs.size() != theta.size()) throw Error(ErrorKind::InvalidArgument, "coeffs/theta length mismatch");
  const double k = static_cast<double>(coeffs.size());
  CostSpec spec = base(CostKind::Abandonment, std::move(coeffs));
  spec.theta = std::move(theta);
  spec.growth_constant = 0.0;
  for (std::size_t i = 0; i < spec.coeffs.size(); ++i) spec.growth_constant += spec.coeffs[i] * spec.theta[i];
  spec.growth_constant *= std::sqrt(k);
  return spec;
}

CostSpec idling_cost(std::size_t k) {
  CostSpec spec = base(CostKind::Idling, Vec(k, 1.0));
  spec.growth_constant = std::sqrt(static_cast<double>(k));
  return spec;
}

CostSpec customers_in_system_cost(Vec coeffs) {
  CostSpec spec = base(CostKind::CustomersInSystem, std::move(coeffs));
  spec.growth_constant = std::accumulate(spec.coeffs.begin(), spec.coeffs.end(), 0.0);
  return spec;
}

CostSpec weighted_sum_cost(std::vector<CostSpec> terms) {
  if (terms.empty()) throw Error(ErrorKind::InvalidArgument, "weighted sum needs at least one term");
  CostSpec spec = base(CostKind::WeightedSum, Vec(terms.front().coeffs.size(), 1.0));
  spec.growth_constant = 0.0;
  spec.growth_degree = 1;
  spec.convex_in_u = true;
  for (const auto& t : terms) {
    spec.growth_constant += t.growth_constant + std::abs(t.offset);
    spec.growth_degree = std::max(spec.growth_degree, t.growth_degree);
    spec.convex_in_u = spec.convex_in_u && t.convex_in_u;
  }
  spec.terms = std::move(terms);
  return spec;
}

CostSpec zero_cost(std::size_t k) {
  CostSpec spec = linear_queue_cost(Vec(k, 0.0));
  spec.growth_constant = 1.0;
  return spec;
}

double eval_Ltilde(const CostSpec& spec, std::span<const double> phi_hat, std::span<const double> psi_hat) {
  for (double p : phi_hat)
    if (p < -1e-9) throw Error(ErrorKind::NegativeQueue, "phi_hat has a negative component");
  double value = spec.offset;
  switch (spec.kind) {
    case CostKind::PowerQueue:
      for (std::size_t i = 0; i < phi_hat.size(); ++i)
        value += spec.coeffs[i] * std::pow(std::max(phi_hat[i], 0.0), spec.powers[i]);
      return value;
    case CostKind::LinearQueue:
      for (std::size_t i = 0; i < phi_hat.size(); ++i) value += spec.coeffs[i] * std::max(phi_hat[i], 0.0);
      return value;
    case CostKind::Abandonment:
      for (std::size_t i = 0; i < phi_hat.size(); ++i)
        value += spec.coeffs[i] * spec.theta[i] * std::max(phi_hat[i], 0.0);
      return value;
    case CostKind::Idling:
      return value + std::max(-sum(psi_hat), 0.0);
    case CostKind::CustomersInSystem:
      for (std::size_t i = 0; i < phi_hat.size(); ++i) value += spec.coeffs[i] * (phi_hat[i] + psi_hat[i]);
      return value;
    case CostKind::WeightedSum:
      for (const auto& term : spec.terms) value += eval_Ltilde(term, phi_hat, psi_hat);
      return value;
    case CostKind::Custom:
      return value + spec.custom(phi_hat, psi_hat);
  }
  return value;
}

double eval_L(const CostSpec& spec, std::span<const double> x_hat, std::span<const double> u) {
  check_simplex(u);
  return eval_L_unchecked(spec, x_hat, u);
}

double eval_L_unchecked(const CostSpec& spec, std::span<const double> x_hat, std::span<const double> u) {
  return eval_L_direct(spec, x_hat, u, sum(x_hat));
}

HolderBound local_holder_bound(const CostSpec& spec, std::size_t k, double box_radius) {
  const double dk = static_cast<double>(k);
  auto max_of = [](const Vec& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
  // Bounds are stated for |L(x,u) - L(y,u)| <= c |1.(x-y)|-type estimates,
  // relaxed to the Euclidean norm with a factor k.
  switch (spec.kind) {
    case CostKind::LinearQueue:
      return {max_of(spec.coeffs) * dk, 1.0};
    case CostKind::Abandonment: {
      double m = 0.0;
      for (std::size_t i = 0; i < spec.coeffs.size(); ++i) m = std::max(m, spec.coeffs[i] * spec.theta[i]);
      return {m * dk, 1.0};
    }
    case CostKind::Idling:
      return {dk, 1.0};
    case CostKind::CustomersInSystem:
      return {max_of(spec.coeffs) * dk, 1.0};
    case CostKind::PowerQueue: {
      // d/dx_j sum_i c_i (s u_i)^p_i = sum_i c_i p_i s^(p_i-1) u_i^p_i with s <= kR.
      double m = 0.0;
      for (std::size_t i = 0; i < spec.coeffs.size(); ++i)
        m = std::max(m, spec.coeffs[i] * spec.powers[i] * std::pow(dk * box_radius, spec.powers[i] - 1.0));
      return {m * dk, 1.0};
    }
    case CostKind::WeightedSum: {
      HolderBound out{0.0, 1.0};
      for (const auto& term : spec.terms) {
        if (!term.is_catalog()) throw Error(ErrorKind::UnsupportedSpec, "weighted sum contains a non-catalog term");
        out.constant += local_holder_bound(term, k, box_radius).constant;
      }
      return out;
    }
    case CostKind::Custom:
      throw Error(ErrorKind::UnsupportedSpec, "no Holder bound for user-defined costs");
  }
  return {};
}

}  // namespace qedlab
