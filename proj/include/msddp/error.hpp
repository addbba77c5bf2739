#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msddp {

enum class ErrorCode {
  // model
  DuplicateNodeId,
  OrphanNode,
  BadProbability,
  NegativeCost,
  BadTree,
  NotStagewiseIndependent,
  // approx
  DimensionMismatch,
  DualBoundViolation,
  WeightMismatch,
  NonFiniteValue,
  EmptyOverApprox,
  // oracles
  InfeasibleNode,
  GridTooLarge,
  // algorithms
  InvalidConfig,
  // instances
  BadParams,
  BadDepth,
  CandidateSetTooSparse,
  NotFiniteState,
  // harness
  SchemaError,
  UnknownCostFamily,
  VersionMismatch,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. The code is stable and is what tests
/// and the command-line front end dispatch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace msddp
