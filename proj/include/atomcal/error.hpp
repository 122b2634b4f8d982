#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atomcal {

enum class ErrorCode {
  // model-gateway
  UnknownBackend,
  TransportError,
  BackendRefusal,
  CacheMissInStrictReplay,
  ImageNotFound,
  MissingProbabilities,
  NoAnswerToken,
  // parsing and validation
  MalformedLine,
  UnknownCategory,
  EmptyTupleList,
  ValidationFailure,
  TooFewParaphrases,
  NoNumberedList,
  // confidence
  NoParseableSamples,
  EmptySampleSet,
  MissingProbability,
  // refinement
  EmptyRefinement,
  // metrics
  EmptyInput,
  MalformedGrouping,
  MissingGroupKey,
  EmptyAnnotation,
  IdMismatch,
  // stats
  InsufficientData,
  ZeroVariancePair,
  DegenerateInput,
  SingleClass,
  MissingGold,
  // io / config
  ParseError,
  SchemaError,
  ConfigError,
  IoError,
  UnknownScenario,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for everything the library throws. The code is stable and
/// is what callers (and the CLI exit-code mapping) should switch on.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  /// The message without the code prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

  /// Transport failures are the only errors worth retrying.
  [[nodiscard]] bool retryable() const noexcept { return code_ == ErrorCode::TransportError; }

private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace atomcal
