#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adlens/aesthetics/features.hpp"
#include "adlens/model.hpp"

namespace adlens::tuner {

struct TunerParams {
  int k = 2;
  double s = 20.0;  // percent
  double t = 4.0;   // percent
  // Empty: use the registry's tunable flags.
  std::vector<bool> tunable_mask;
  std::uint64_t max_combinations = 10'000'000;
};

// {-s, -s+t, ..., 0, ..., s-t, s}; s itself is included even when it is not
// a multiple of t. Throws ConfigError for non-positive s or t, or t > s.
std::vector<double> percent_grid(double s, double t);

struct Change {
  std::string feature;
  std::string name;
  double percent = 0.0;
  double old_value = 0.0;
  double new_value = 0.0;
};

struct TuningSuggestion {
  std::vector<Change> changes;  // sorted by feature id
  double predicted_before = 0.0;
  double predicted_after = 0.0;
};

struct WhatIfResult {
  double predicted = 0.0;
  aesthetics::FeatureVector adjusted;
};

// value * (1 + pct/100), or value + pct/100 * std when |value| < 1e-9,
// clamped to the descriptor bounds.
double adjust_value(double value, double percent, double feature_std,
                    const aesthetics::FeatureDescriptor& d);

// Number of candidate assignments (zero change included) for m tunable
// features, grid size g and at most k changes. Saturates at UINT64_MAX.
std::uint64_t combination_count(std::size_t m, std::size_t g, int k);

// Exhaustive search. Ties on the predicted score go to fewer changes, then
// smaller L1 percent, then the lexicographically smaller sorted id list, then
// the smaller percent list. Throws RegistryMismatch, ConfigError and
// BudgetExceeded.
TuningSuggestion suggest(const model::EngagementModel& m, const aesthetics::FeatureRegistry& registry,
                         const aesthetics::FeatureVector& x, const TunerParams& p);

// Throws UnknownFeature and RegistryMismatch.
WhatIfResult whatif(const model::EngagementModel& m, const aesthetics::FeatureRegistry& registry,
                    const aesthetics::FeatureVector& x, const std::map<std::string, double>& deltas);

std::map<std::string, double> suggestion_deltas(const TuningSuggestion& s);

nlohmann::json suggestion_to_json(const TuningSuggestion& s);
// Throws SchemaError.
TuningSuggestion suggestion_from_json(const nlohmann::json& j);

}  // namespace adlens::tuner
