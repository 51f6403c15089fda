#include "qedlab/error.hpp"

namespace qedlab {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BalanceViolation: return "BalanceViolation";
    case ErrorKind::NonPositiveRate: return "NonPositiveRate";
    case ErrorKind::NegativeAbandonment: return "NegativeAbandonment";
    case ErrorKind::RateUnderflow: return "RateUnderflow";
    case ErrorKind::NegativeQueue: return "NegativeQueue";
    case ErrorKind::SimplexViolation: return "SimplexViolation";
    case ErrorKind::UnsupportedSpec: return "UnsupportedSpec";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularLinearSystem: return "SingularLinearSystem";
    case ErrorKind::NonMonotoneScheme: return "NonMonotoneScheme";
    case ErrorKind::InvariantBreach: return "InvariantBreach";
    case ErrorKind::PolicyContractViolation: return "PolicyContractViolation";
    case ErrorKind::NonIntegerTotal: return "NonIntegerTotal";
    case ErrorKind::EmptyK0: return "EmptyK0";
    case ErrorKind::NonConvexCost: return "NonConvexCost";
    case ErrorKind::ZeroTheta: return "ZeroTheta";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qedlab
