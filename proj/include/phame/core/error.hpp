#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace phame {

enum class ErrorCode {
  // SMILES grammar
  UnclosedBranch,
  UnmatchedRingBond,
  UnknownAtomSymbol,
  InvalidCharge,
  InvalidSyntax,
  // numerics and shapes
  WidthMismatch,
  DimensionMismatch,
  InvalidParameters,
  StepOutOfRange,
  ZeroVector,
  InsufficientData,
  NonConvergence,
  NonFiniteLoss,
  // data-level failures
  MissingSeed,
  EmptyPartition,
  ZeroConditionVector,
  EmptyInput,
  OracleUnavailable,
  UnknownClassLabel,
  InvalidK,
  EmptyBinderSet,
  ChecksumMismatch,
  Io,
  Data,
  // operator-facing
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnclosedBranch: return "UnclosedBranch";
    case ErrorCode::UnmatchedRingBond: return "UnmatchedRingBond";
    case ErrorCode::UnknownAtomSymbol: return "UnknownAtomSymbol";
    case ErrorCode::InvalidCharge: return "InvalidCharge";
    case ErrorCode::InvalidSyntax: return "InvalidSyntax";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingSeed: return "MissingSeed";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::ZeroConditionVector: return "ZeroConditionVector";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::UnknownClassLabel: return "UnknownClassLabel";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::EmptyBinderSet: return "EmptyBinderSet";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Data: return "Data";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Process exit status for the CLI: 2 config, 3 data, 4 numeric failure.
constexpr int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidParameters:
    case ErrorCode::InvalidK:
      return 2;
    case ErrorCode::NonConvergence:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::ZeroVector:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// SMILES grammar failure; offset is the byte position of the fault.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, const std::string& what)
      : Error(code, what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace phame
