#include "adlens/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "adlens/error.hpp"

namespace adlens::tuner {

using aesthetics::FeatureDescriptor;
using aesthetics::FeatureRegistry;
using aesthetics::FeatureVector;
using nlohmann::json;

namespace {

constexpr double kZeroValue = 1e-9;

void check_hashes(const model::EngagementModel& m, const FeatureRegistry& registry,
                  const FeatureVector& x) {
  if (x.registry_hash != m.registry_hash)
    throw Error(Errc::RegistryMismatch, "feature vector registry " + x.registry_hash +
                                            " does not match model registry " + m.registry_hash);
  if (registry.hash() != m.registry_hash)
    throw Error(Errc::RegistryMismatch, "registry " + registry.hash() +
                                            " does not match model registry " + m.registry_hash);
  if (x.values.size() != registry.size())
    throw Error(Errc::DimensionMismatch, "feature vector length does not match the registry");
}

double feature_std(const model::EngagementModel& m, std::size_t i) {
  return i < m.feature_stds.size() ? m.feature_stds[i] : 1.0;
}

struct Candidate {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> features;  // sorted by id
  std::vector<double> percents;
  double l1 = 0.0;
};

// Key for lexicographic comparison by feature id.
std::vector<std::string> id_list(const Candidate& c, const FeatureRegistry& r) {
  std::vector<std::string> ids;
  ids.reserve(c.features.size());
  for (std::size_t f : c.features) ids.push_back(r[f].id);
  return ids;
}

bool better(const Candidate& a, const Candidate& b, const FeatureRegistry& r) {
  if (a.score != b.score) return a.score > b.score;
  if (a.features.size() != b.features.size()) return a.features.size() < b.features.size();
  if (a.l1 != b.l1) return a.l1 < b.l1;
  const auto ia = id_list(a, r), ib = id_list(b, r);
  if (ia != ib) return ia < ib;
  return a.percents < b.percents;
}

class Search {
 public:
  Search(const model::EngagementModel& m, const FeatureRegistry& r, const FeatureVector& x,
         std::vector<std::size_t> tunable, std::vector<double> steps, int k)
      : m_(m), r_(r), base_(x), work_(x), tunable_(std::move(tunable)), steps_(std::move(steps)),
        k_(k) {}

  Candidate run() {
    Candidate zero;
    zero.score = model::predict(m_, work_);
    best_ = zero;
    recurse(0);
    return best_;
  }

 private:
  void recurse(std::size_t start) {
    if (static_cast<int>(chosen_.size()) >= k_) return;
    for (std::size_t ti = start; ti < tunable_.size(); ++ti) {
      const std::size_t f = tunable_[ti];
      for (double pct : steps_) {
        work_.values[f] = adjust_value(base_.values[f], pct, feature_std(m_, f), r_[f]);
        chosen_.emplace_back(f, pct);
        consider();
        recurse(ti + 1);
        chosen_.pop_back();
      }
      work_.values[f] = base_.values[f];
    }
  }

  void consider() {
    Candidate c;
    c.score = model::predict(m_, work_);
    if (c.score < best_.score) return;
    auto order = chosen_;
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return r_[a.first].id < r_[b.first].id;
    });
    for (const auto& [f, pct] : order) {
      c.features.push_back(f);
      c.percents.push_back(pct);
      c.l1 += std::fabs(pct);
    }
    if (better(c, best_, r_)) best_ = std::move(c);
  }

  const model::EngagementModel& m_;
  const FeatureRegistry& r_;
  const FeatureVector& base_;
  FeatureVector work_;
  std::vector<std::size_t> tunable_;
  std::vector<double> steps_;
  int k_;
  std::vector<std::pair<std::size_t, double>> chosen_;
  Candidate best_;
};

}  // namespace

std::vector<double> percent_grid(double s, double t) {
  if (!(s > 0.0) || !(t > 0.0) || !std::isfinite(s) || !std::isfinite(t))
    throw Error(Errc::ConfigError, "tuner s and t must be positive");
  if (t > s) throw Error(Errc::ConfigError, "tuner step t exceeds range s");
  const double slack = 1e-9 * s;
  const auto n = static_cast<long>(std::floor(s / t + 1e-9));
  std::vector<double> grid;
  for (long i = -n; i <= n; ++i) grid.push_back(static_cast<double>(i) * t);
  if (static_cast<double>(n) * t < s - slack) {
    grid.insert(grid.begin(), -s);
    grid.push_back(s);
  } else {
    grid.front() = -s;
    grid.back() = s;
  }
  return grid;
}

double adjust_value(double value, double percent, double feature_std, const FeatureDescriptor& d) {
  double v = std::fabs(value) < kZeroValue ? value + percent / 100.0 * feature_std
                                           : value * (1.0 + percent / 100.0);
  if (d.lower) v = std::max(v, *d.lower);
  if (d.upper) v = std::min(v, *d.upper);
  return v;
}

std::uint64_t combination_count(std::size_t m, std::size_t g, int k) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const long double nonzero = g > 0 ? static_cast<long double>(g - 1) : 0.0L;
  long double total = 0.0L, binom = 1.0L, power = 1.0L;
  for (int j = 0; j <= k && static_cast<std::size_t>(j) <= m; ++j) {
    total += binom * power;
    binom = binom * static_cast<long double>(m - j) / static_cast<long double>(j + 1);
    power *= nonzero;
  }
  return total >= static_cast<long double>(kMax) ? kMax : static_cast<std::uint64_t>(std::llround(total));
}

TuningSuggestion suggest(const model::EngagementModel& m, const FeatureRegistry& registry,
                         const FeatureVector& x, const TunerParams& p) {
  check_hashes(m, registry, x);
  const auto grid = percent_grid(p.s, p.t);
  if (!p.tunable_mask.empty() && p.tunable_mask.size() != registry.size())
    throw Error(Errc::DimensionMismatch, "tunable mask length does not match the registry");
  std::vector<std::size_t> tunable;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const bool on = p.tunable_mask.empty() ? registry[i].tunable : p.tunable_mask[i];
    if (on) tunable.push_back(i);
  }
  if (p.k < 1) throw Error(Errc::ConfigError, "tuner k must be positive");
  if (static_cast<std::size_t>(p.k) > tunable.size())
    throw Error(Errc::ConfigError, "tuner k exceeds the number of tunable features");
  const auto count = combination_count(tunable.size(), grid.size(), p.k);
  if (count > p.max_combinations)
    throw Error(Errc::BudgetExceeded, std::to_string(count) + " tuning combinations exceed the cap of " +
                                          std::to_string(p.max_combinations) + "; lower k or raise t");

  std::vector<double> steps;
  for (double g : grid)
    if (g != 0.0) steps.push_back(g);
  Search search(m, registry, x, tunable, steps, p.k);
  const Candidate best = search.run();

  TuningSuggestion out;
  out.predicted_before = model::predict(m, x);
  for (std::size_t c = 0; c < best.features.size(); ++c) {
    const std::size_t f = best.features[c];
    Change ch;
    ch.feature = registry[f].id;
    ch.name = registry[f].human_name;
    ch.percent = best.percents[c];
    ch.old_value = x.values[f];
    ch.new_value = adjust_value(x.values[f], ch.percent, feature_std(m, f), registry[f]);
    out.changes.push_back(std::move(ch));
  }
  out.predicted_after = best.score;
  return out;
}

WhatIfResult whatif(const model::EngagementModel& m, const FeatureRegistry& registry,
                    const FeatureVector& x, const std::map<std::string, double>& deltas) {
  check_hashes(m, registry, x);
  WhatIfResult out;
  out.adjusted = x;
  for (const auto& [id, pct] : deltas) {
    const auto idx = registry.index_of(id);
    if (!idx) throw Error(Errc::UnknownFeature, "unknown feature: " + id);
    if (!std::isfinite(pct)) throw Error(Errc::SchemaError, "percent change for " + id + " is not finite");
    if (pct == 0.0) continue;
    out.adjusted.values[*idx] = adjust_value(x.values[*idx], pct, feature_std(m, *idx), registry[*idx]);
  }
  out.predicted = model::predict(m, out.adjusted);
  return out;
}

std::map<std::string, double> suggestion_deltas(const TuningSuggestion& s) {
  std::map<std::string, double> d;
  for (const auto& c : s.changes) d[c.feature] = c.percent;
  return d;
}

json suggestion_to_json(const TuningSuggestion& s) {
  json changes = json::array();
  for (const auto& c : s.changes)
    changes.push_back({{"feature", c.feature},
                       {"name", c.name},
                       {"percent", c.percent},
                       {"old", c.old_value},
                       {"new", c.new_value}});
  return {{"changes", changes}, {"before", s.predicted_before}, {"after", s.predicted_after}};
}

TuningSuggestion suggestion_from_json(const json& j) {
  try {
    TuningSuggestion s;
    for (const auto& c : j.at("changes"))
      s.changes.push_back({c.at("feature").get<std::string>(), c.at("name").get<std::string>(),
                           c.at("percent").get<double>(), c.at("old").get<double>(),
                           c.at("new").get<double>()});
    s.predicted_before = j.at("before").get<double>();
    s.predicted_after = j.at("after").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("malformed suggestion: ") + e.what());
  }
}

}  // namespace adlens::tuner
