#include <gtest/gtest.h>

#include <random>

#include "adlens/error.hpp"
#include "adlens/tuner.hpp"
#include "oracles.hpp"

namespace {

using namespace adlens;
using aesthetics::FeatureDescriptor;
using aesthetics::FeatureFamily;
using aesthetics::FeatureRegistry;
using aesthetics::FeatureVector;

FeatureRegistry make_registry(std::size_t n, std::size_t non_tunable = 0) {
  std::vector<FeatureDescriptor> fs;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureDescriptor d;
    d.id = "f" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    d.family = FeatureFamily::ColorExposure;
    d.human_name = "feature " + std::to_string(i);
    d.tunable = i >= non_tunable;
    if (i % 3 == 0) {
      d.lower = 0.0;
      d.upper = 1.0;
    }
    fs.push_back(d);
  }
  return FeatureRegistry(fs, {});
}

model::EngagementModel linear_model(const FeatureRegistry& r, std::vector<double> w, double b = 0.0) {
  model::EngagementModel m;
  m.kernel.kind = model::KernelKind::Linear;
  m.support_vectors = {std::move(w)};
  m.dual_coefs = {1.0};
  m.bias_term = b;
  m.feature_means.assign(r.size(), 0.0);
  m.feature_stds.assign(r.size(), 1.0);
  m.registry_hash = r.hash();
  return m;
}

FeatureVector vec(const FeatureRegistry& r, std::vector<double> v) { return {r.hash(), std::move(v)}; }

model::EngagementModel random_rbf(const FeatureRegistry& r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  model::Matrix X(30, std::vector<double>(r.size()));
  std::vector<double> y(30);
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (auto& v : X[i]) v = u(rng);
    y[i] = std::sin(3.0 * X[i][0]) + X[i][1] * X[i][2] - X[i][r.size() - 1];
  }
  model::Hyperparams hp;
  hp.C = 5.0;
  hp.epsilon = 0.05;
  return model::train_svr(X, y, hp, r.hash()).model;
}

TEST(PercentGrid, Steps) {
  EXPECT_EQ(tuner::percent_grid(20, 4),
            (std::vector<double>{-20, -16, -12, -8, -4, 0, 4, 8, 12, 16, 20}));
  EXPECT_EQ(tuner::percent_grid(10, 4), (std::vector<double>{-10, -8, -4, 0, 4, 8, 10}));
  EXPECT_EQ(tuner::percent_grid(5, 5), (std::vector<double>{-5, 0, 5}));
  EXPECT_THROW(tuner::percent_grid(4, 5), Error);
  EXPECT_THROW(tuner::percent_grid(0, 0), Error);
}

TEST(AdjustValue, MultiplicativeAdditiveClamped) {
  FeatureDescriptor free;
  FeatureDescriptor unit;
  unit.lower = 0.0;
  unit.upper = 1.0;
  EXPECT_DOUBLE_EQ(tuner::adjust_value(2.0, 10.0, 1.0, free), 2.2);
  EXPECT_DOUBLE_EQ(tuner::adjust_value(0.0, 10.0, 3.0, free), 0.3);
  EXPECT_DOUBLE_EQ(tuner::adjust_value(0.95, 20.0, 1.0, unit), 1.0);
  EXPECT_DOUBLE_EQ(tuner::adjust_value(0.0, -20.0, 1.0, unit), 0.0);
}

TEST(CombinationCount, MatchesFormula) {
  // 1 + 40*4 + C(40,2)*16
  EXPECT_EQ(tuner::combination_count(40, 5, 2), 1u + 160u + 780u * 16u);
  EXPECT_EQ(tuner::combination_count(3, 11, 5), 11u * 11u * 11u);
}

TEST(Suggest, MonotoneSingleFeature) {
  const auto r = make_registry(6);
  std::vector<double> w(6, 0.0);
  w[4] = 2.0;
  const auto m = linear_model(r, w);
  const auto x = vec(r, {0.5, 1, 2, 0.3, 3, 4});
  tuner::TunerParams p;
  p.k = 1;
  p.s = 20;
  p.t = 4;
  const auto s = tuner::suggest(m, r, x, p);
  ASSERT_EQ(s.changes.size(), 1u);
  EXPECT_EQ(s.changes[0].feature, "f04");
  EXPECT_EQ(s.changes[0].name, "feature 4");
  EXPECT_DOUBLE_EQ(s.changes[0].percent, 20.0);
  EXPECT_DOUBLE_EQ(s.changes[0].old_value, 3.0);
  EXPECT_DOUBLE_EQ(s.changes[0].new_value, 3.6);
  EXPECT_DOUBLE_EQ(s.predicted_before, 6.0);
  EXPECT_DOUBLE_EQ(s.predicted_after, 7.2);
}

TEST(Suggest, ConstantModelNoChanges) {
  const auto r = make_registry(5);
  const auto m = linear_model(r, std::vector<double>(5, 0.0), 1.5);
  const auto s = tuner::suggest(m, r, vec(r, {1, 2, 3, 4, 5}), {});
  EXPECT_TRUE(s.changes.empty());
  EXPECT_EQ(s.predicted_after, s.predicted_before);
  EXPECT_EQ(s.predicted_after, 1.5);
}

TEST(Suggest, TieBreakPrefersSmallerChange) {
  const auto r = make_registry(4);
  // f00 is bounded by 1, so +12% and everything above it reach the same score.
  std::vector<double> w{1.0, 0.0, 0.0, 0.0};
  const auto m = linear_model(r, w);
  const auto s = tuner::suggest(m, r, vec(r, {0.9, 1, 1, 0.5}), {2, 20, 4, {}, 10'000'000});
  ASSERT_EQ(s.changes.size(), 1u);
  EXPECT_EQ(s.changes[0].feature, "f00");
  EXPECT_DOUBLE_EQ(s.changes[0].percent, 12.0);
  EXPECT_DOUBLE_EQ(s.predicted_after, 1.0);
}

TEST(Suggest, NonTunableIgnored) {
  const auto r = make_registry(4, 2);
  const auto m = linear_model(r, {5.0, 5.0, 1.0, 0.0});
  const auto s = tuner::suggest(m, r, vec(r, {0.5, 1, 1, 1}), {1, 10, 5, {}, 10'000'000});
  ASSERT_EQ(s.changes.size(), 1u);
  EXPECT_EQ(s.changes[0].feature, "f02");
}

TEST(Suggest, Errors) {
  const auto r = make_registry(6);
  auto m = linear_model(r, std::vector<double>(6, 1.0));
  const auto x = vec(r, std::vector<double>(6, 0.5));
  tuner::TunerParams p;
  p.k = 3;
  p.s = 20;
  p.t = 1;
  p.max_combinations = 1000;
  try {
    tuner::suggest(m, r, x, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BudgetExceeded);
  }
  p.max_combinations = 10'000'000;
  p.k = 7;
  EXPECT_THROW(tuner::suggest(m, r, x, p), Error);
  p.k = 1;
  m.registry_hash = "0000000000000000";
  try {
    tuner::suggest(m, r, x, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RegistryMismatch);
  }
}

TEST(Suggest, MatchesOracleOnLinear40) {
  const auto r = make_registry(40, 3);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> w(40), xv(40);
    for (auto& v : w) v = g(rng);
    for (auto& v : xv) v = u(rng) < 0.1 ? 0.0 : u(rng);
    auto m = linear_model(r, w);
    m.feature_stds.assign(40, 0.7);
    const auto x = vec(r, xv);
    const tuner::TunerParams p{2, 8, 4, {}, 10'000'000};
    const auto s = tuner::suggest(m, r, x, p);
    const auto o = oracle::brute_force_tune(m, r, x, 2, tuner::percent_grid(8, 4));
    EXPECT_EQ(s.predicted_after, o.score);
    ASSERT_EQ(s.changes.size(), o.ids.size());
    for (std::size_t i = 0; i < o.ids.size(); ++i) {
      EXPECT_EQ(s.changes[i].feature, o.ids[i]);
      EXPECT_EQ(s.changes[i].percent, o.percents[i]);
    }
  }
}

TEST(Suggest, MatchesOracleOnRbfWithTies) {
  const auto r = make_registry(8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = random_rbf(r, rng);
    std::vector<double> xv(8);
    for (auto& v : xv) v = u(rng);
    xv[3] = 1.0;  // bounded at the top: every positive step ties with zero
    const auto x = vec(r, xv);
    for (int k = 1; k <= 2; ++k) {
      const tuner::TunerParams p{k, 20, 4, {}, 10'000'000};
      const auto s = tuner::suggest(m, r, x, p);
      const auto o = oracle::brute_force_tune(m, r, x, k, tuner::percent_grid(20, 4));
      EXPECT_EQ(s.predicted_after, o.score);
      ASSERT_EQ(s.changes.size(), o.ids.size());
      for (std::size_t i = 0; i < o.ids.size(); ++i) {
        EXPECT_EQ(s.changes[i].feature, o.ids[i]);
        EXPECT_EQ(s.changes[i].percent, o.percents[i]);
      }
      EXPECT_GE(s.predicted_after, s.predicted_before);
    }
  }
}

TEST(Suggest, Deterministic) {
  const auto r = make_registry(8);
  std::mt19937_64 rng(9);
  const auto m = random_rbf(r, rng);
  const auto x = vec(r, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  const auto a = tuner::suggestion_to_json(tuner::suggest(m, r, x, {}));
  const auto b = tuner::suggestion_to_json(tuner::suggest(m, r, x, {}));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(WhatIf, IdentityAndZero) {
  const auto r = make_registry(8);
  std::mt19937_64 rng(3);
  const auto m = random_rbf(r, rng);
  const auto x = vec(r, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  const double base = model::predict(m, x);
  EXPECT_EQ(tuner::whatif(m, r, x, {}).predicted, base);
  const auto z = tuner::whatif(m, r, x, {{"f02", 0.0}});
  EXPECT_EQ(z.predicted, base);
  EXPECT_EQ(z.adjusted.values, x.values);
  try {
    tuner::whatif(m, r, x, {{"nope", 5.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownFeature);
  }
}

TEST(WhatIf, ReplaysSuggestionExactly) {
  const auto r = make_registry(10);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = random_rbf(r, rng);
    std::vector<double> xv(10);
    for (auto& v : xv) v = u(rng);
    const auto x = vec(r, xv);
    const auto s = tuner::suggest(m, r, x, {2, 16, 4, {}, 10'000'000});
    const auto w = tuner::whatif(m, r, x, tuner::suggestion_deltas(s));
    EXPECT_EQ(w.predicted, s.predicted_after);
    for (const auto& c : s.changes) EXPECT_EQ(w.adjusted.values[*r.index_of(c.feature)], c.new_value);
  }
}

TEST(SuggestionJson, RoundTrip) {
  tuner::TuningSuggestion s;
  s.changes.push_back({"f01", "feature 1", 24.0, 0.5, 0.62});
  s.predicted_before = 0.1;
  s.predicted_after = 0.3;
  const auto j = tuner::suggestion_to_json(s);
  EXPECT_EQ(j["changes"][0]["percent"], 24.0);
  EXPECT_EQ(j["after"], 0.3);
  const auto back = tuner::suggestion_from_json(j);
  EXPECT_EQ(tuner::suggestion_to_json(back), j);
  EXPECT_THROW(tuner::suggestion_from_json(nlohmann::json::object()), Error);
}

}  // namespace
