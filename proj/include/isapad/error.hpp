#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isapad {

enum class ErrorCode {
  MissingSlice,
  ShapeMismatch,
  MetaError,
  DuplicateId,
  SchemaError,
  IndexError,
  ConfigError,
  DomainError,
  TooSmall,
  NoForeground,
  LabelError,
  ContractViolation,
  DegenerateDataset,
  InsufficientGroups,
  CheckpointError,
  IoError,
  UsageError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingSlice: return "MissingSlice";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MetaError: return "MetaError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IndexError: return "IndexError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::NoForeground: return "NoForeground";
    case ErrorCode::LabelError: return "LabelError";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::DegenerateDataset: return "DegenerateDataset";
    case ErrorCode::InsufficientGroups: return "InsufficientGroups";
    case ErrorCode::CheckpointError: return "CheckpointError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can report it as `ERROR <code>: <message>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace isapad
