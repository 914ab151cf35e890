#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsmile {

enum class ErrorCode {
  EmptyPrompt,
  ExhaustiveTooLarge,
  LengthMismatch,
  ParseError,
  EmptyTable,
  EmptyCloud,
  AllTokensOOV,
  DimensionMismatch,
  EmptyInput,
  NonPositiveSigma,
  InvalidArgument,
  ShapeMismatch,
  AllZeroWeights,
  MixedSampleKinds,
  DegenerateTruth,
  KTooLarge,
  TooFewRuns,
  DegenerateVariance,
  AdjustedUndefined,
  Timeout,
  TransportError,
  MalformedResponse,
  CacheIOError,
  ConfigError,
  FileWriteError,
  IOError,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception; `code()` identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// True for failures originating in model access (CLI exit code 3).
inline bool is_adapter_error(ErrorCode c) {
  return c == ErrorCode::Timeout || c == ErrorCode::TransportError ||
         c == ErrorCode::MalformedResponse;
}

}  // namespace gsmile
