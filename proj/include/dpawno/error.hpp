#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpawno {

enum class ErrorCode {
  ShapeMismatch,
  UnknownPrimitive,
  NonScalarSeed,
  EmptyTape,
  NonFiniteValue,
  NonFiniteLoss,
  SignalTooShort,
  InconsistentCoeffLengths,
  UnsupportedTermForBenchmark,
  NonFiniteState,
  CountExceedsFamily,
  IoError,
  FormatVersionMismatch,
  ChecksumMismatch,
  ScheduleExhausted,
  DegenerateSamples,
  NotPositiveDefinite,
  InvalidArgument,
  UsageError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownPrimitive: return "UnknownPrimitive";
    case ErrorCode::NonScalarSeed: return "NonScalarSeed";
    case ErrorCode::EmptyTape: return "EmptyTape";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::InconsistentCoeffLengths: return "InconsistentCoeffLengths";
    case ErrorCode::UnsupportedTermForBenchmark: return "UnsupportedTermForBenchmark";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::CountExceedsFamily: return "CountExceedsFamily";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ScheduleExhausted: return "ScheduleExhausted";
    case ErrorCode::DegenerateSamples: return "DegenerateSamples";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace dpawno
