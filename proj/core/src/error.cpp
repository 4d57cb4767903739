#include "adlens/error.hpp"

namespace adlens {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DegeneratePage: return "DegeneratePage";
    case Errc::SchemaError: return "SchemaError";
    case Errc::IoError: return "IoError";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::BadK: return "BadK";
    case Errc::NoSeedInVocabulary: return "NoSeedInVocabulary";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooFewScores: return "TooFewScores";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::DecodeError: return "DecodeError";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::TooSmall: return "TooSmall";
    case Errc::RegistryMismatch: return "RegistryMismatch";
    case Errc::DegenerateQuartiles: return "DegenerateQuartiles";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::ConfigError: return "ConfigError";
    case Errc::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

}  // namespace adlens
