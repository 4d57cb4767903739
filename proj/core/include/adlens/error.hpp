#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adlens {

enum class Errc {
  DegeneratePage,
  SchemaError,
  IoError,
  InsufficientData,
  BadK,
  NoSeedInVocabulary,
  DimensionMismatch,
  TooFewScores,
  NonFiniteLoss,
  SupportMismatch,
  DecodeError,
  UnsupportedFormat,
  TooSmall,
  RegistryMismatch,
  DegenerateQuartiles,
  SingleClass,
  EmptyTestSet,
  BudgetExceeded,
  UnknownFeature,
  ConfigError,
  StageFailure,
};

std::string_view to_string(Errc code);

// Every failure raised by the library carries one of the codes above so
// callers (CLI exit codes, HTTP status mapping) can dispatch without parsing
// messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace adlens
