#include "gsmile/error.hpp"

namespace gsmile {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyPrompt: return "EmptyPrompt";
    case ErrorCode::ExhaustiveTooLarge: return "ExhaustiveTooLarge";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::AllTokensOOV: return "AllTokensOOV";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::MixedSampleKinds: return "MixedSampleKinds";
    case ErrorCode::DegenerateTruth: return "DegenerateTruth";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::TooFewRuns: return "TooFewRuns";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::AdjustedUndefined: return "AdjustedUndefined";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::CacheIOError: return "CacheIOError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FileWriteError: return "FileWriteError";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

}  // namespace gsmile
