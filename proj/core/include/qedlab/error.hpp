#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qedlab {

enum class ErrorKind {
  BalanceViolation,
  NonPositiveRate,
  NegativeAbandonment,
  RateUnderflow,
  NegativeQueue,
  SimplexViolation,
  UnsupportedSpec,
  NoConvergence,
  SingularLinearSystem,
  NonMonotoneScheme,
  InvariantBreach,
  PolicyContractViolation,
  NonIntegerTotal,
  EmptyK0,
  NonConvexCost,
  ZeroTheta,
  InvalidArgument,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// All library failures are reported through this exception; `kind()` lets
/// callers (the CLI in particular) map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qedlab
