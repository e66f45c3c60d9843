#include "rydsense/error.hpp"

namespace rydsense {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicField: return "NonMonotonicField";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::MultipleResonances: return "MultipleResonances";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NoResonance: return "NoResonance";
    case ErrorCode::NonpositiveSeparation: return "NonpositiveSeparation";
    case ErrorCode::DegenerateDefect: return "DegenerateDefect";
    case ErrorCode::NonpositiveRabi: return "NonpositiveRabi";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::FieldOutOfTableRange: return "FieldOutOfTableRange";
    case ErrorCode::CrossRowPair: return "CrossRowPair";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::IntegratorFailure: return "IntegratorFailure";
    case ErrorCode::AmbiguousEstimate: return "AmbiguousEstimate";
    case ErrorCode::NoProbeRows: return "NoProbeRows";
    case ErrorCode::CacheMismatch: return "CacheMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
    case ErrorCode::MalformedRow:
    case ErrorCode::NonMonotonicField:
    case ErrorCode::EmptyTable:
    case ErrorCode::MultipleResonances:
    case ErrorCode::InvalidGeometry:
    case ErrorCode::InvalidProfile:
    case ErrorCode::CacheMismatch:
      return ErrorCategory::Config;
    case ErrorCode::IntegratorFailure:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Domain;
  }
}

}  // namespace rydsense
