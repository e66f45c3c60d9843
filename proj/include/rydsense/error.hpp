#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rydsense {

enum class ErrorCode {
  // table ingestion
  MalformedRow,
  NonMonotonicField,
  EmptyTable,
  MultipleResonances,
  // pair-state physics
  OutOfRange,
  NoResonance,
  NonpositiveSeparation,
  DegenerateDefect,
  NonpositiveRabi,
  // geometry and fields
  InvalidGeometry,
  InvalidProfile,
  FieldOutOfTableRange,
  CrossRowPair,
  // dynamics
  BadLabel,
  InvalidState,
  IntegratorFailure,
  // sensing
  AmbiguousEstimate,
  NoProbeRows,
  CacheMismatch,
  // front end
  ConfigError,
  IoError,
};

enum class ErrorCategory { Config, Domain, Numerical };

std::string_view error_code_name(ErrorCode code) noexcept;
ErrorCategory error_category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return error_category(code_); }

 private:
  ErrorCode code_;
};

}  // namespace rydsense
