#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "adlens/error.hpp"
#include "adlens/model.hpp"
#include "oracles.hpp"

using namespace adlens;
using namespace adlens::model;
using adlens::oracle::svc_kkt_violation;
using adlens::oracle::svr_kkt_violation;

namespace {

constexpr double kTol = 1e-3;

template <class F>
void expect_error(Errc code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Matrix random_matrix(std::size_t n, std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix X(n, std::vector<double>(d));
  for (auto& r : X)
    for (auto& v : r) v = nd(rng);
  return X;
}

std::vector<int> linear_labels(const Matrix& X, std::mt19937_64& rng, double noise) {
  std::normal_distribution<double> nd(0.0, noise);
  std::vector<int> out;
  for (const auto& r : X) out.push_back(r[0] - 0.5 * r[1] + nd(rng) > 0.0 ? 1 : -1);
  return out;
}

}  // namespace

TEST(Kernel, RbfAndLinear) {
  const KernelSpec rbf{KernelKind::Rbf, 0.5};
  const std::vector<double> a{1, 2}, b{2, 0};
  EXPECT_DOUBLE_EQ(rbf(a, a), 1.0);
  EXPECT_DOUBLE_EQ(rbf(a, b), std::exp(-0.5 * 5.0));
  const KernelSpec lin{KernelKind::Linear, 1.0};
  EXPECT_DOUBLE_EQ(lin(a, b), 2.0);
}

TEST(Svr, SinglePointInterpolation) {
  const Matrix X{{0.3, -1.2, 4.0}};
  const std::vector<double> y{5.0};
  for (double eps : {0.0, 0.1, 1.0}) {
    Hyperparams hp;
    hp.epsilon = eps;
    const auto fit = train_svr(X, y, hp, "h");
    aesthetics::FeatureVector fv{"h", X[0]};
    EXPECT_LE(std::fabs(predict(fit.model, fv) - 5.0), eps);
  }
}

TEST(Svr, SmoothMonotoneTarget) {
  Matrix X;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    const double x = -1.0 + 2.0 * i / 49.0;
    X.push_back({x});
    y.push_back(std::tanh(2.0 * x) + 0.5 * x);
  }
  Hyperparams hp;
  hp.C = 10.0;
  hp.epsilon = 0.01;
  const auto fit = train_svr(X, y, hp, "");
  EXPECT_TRUE(fit.report.converged);
  const auto rep = evaluate_regressor(fit.model, X, y);
  EXPECT_LT(*rep.rmse, 0.05);
  EXPECT_LE(svr_kkt_violation(fit, X, y), kTol);
}

TEST(Svr, KktAuditOnRandomProblems) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng() % 80;
    const std::size_t d = 1 + rng() % 6;
    const auto X = random_matrix(n, d, rng, 1.0 + (rng() % 4));
    std::normal_distribution<double> nd(0.0, 0.3);
    std::vector<double> y;
    for (const auto& r : X) y.push_back(std::sin(r[0]) + 0.2 * r[d - 1] * r[d - 1] + nd(rng));
    Hyperparams hp;
    hp.C = std::pow(10.0, static_cast<double>(rng() % 4) - 1.0);
    hp.epsilon = 0.05 * static_cast<double>(rng() % 4);
    const auto fit = train_svr(X, y, hp, "");
    ASSERT_TRUE(fit.report.converged);
    EXPECT_LT(fit.report.max_kkt_violation, kTol);
    EXPECT_LE(svr_kkt_violation(fit, X, y), kTol + 1e-9) << "trial " << trial;
    double sum = 0.0;
    for (double c : fit.coefficients) {
      EXPECT_LE(std::fabs(c), hp.C);
      sum += c;
    }
    EXPECT_NEAR(sum, 0.0, 1e-9 * hp.C * static_cast<double>(n));
    for (double c : fit.model.dual_coefs) EXPECT_NE(c, 0.0);
  }
}

TEST(Svr, PredictionAtSupportVectorWithinTube) {
  std::mt19937_64 rng(12);
  const auto X = random_matrix(40, 2, rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(r[0] * r[1] + r[0]);
  Hyperparams hp;
  hp.C = 1e4;
  hp.epsilon = 0.05;
  hp.gamma = 1.0;
  const auto fit = train_svr(X, y, hp, "");
  ASSERT_TRUE(fit.report.converged);
  std::size_t probed = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (fit.coefficients[i] == 0.0) continue;
    ASSERT_LT(std::fabs(fit.coefficients[i]), hp.C) << "expected an interpolating fit";
    EXPECT_LE(std::fabs(fit.model.decision(X[i]) - y[i]), hp.epsilon + kTol);
    ++probed;
  }
  EXPECT_GT(probed, 0u);
}

TEST(Svr, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(13);
  const auto X = random_matrix(60, 3, rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(r[0] - r[2]);
  TrainOptions opts;
  opts.record_objective = true;
  const auto fit = train_svr(X, y, {}, "", opts);
  ASSERT_GT(fit.report.objective_history.size(), 2u);
  for (std::size_t i = 1; i < fit.report.objective_history.size(); ++i)
    EXPECT_LE(fit.report.objective_history[i], fit.report.objective_history[i - 1] + 1e-12);
}

TEST(Svr, StandardizationRoundTrip) {
  std::mt19937_64 rng(14);
  auto X = random_matrix(50, 4, rng);
  for (auto& r : X) r[1] = 100.0 + 40.0 * r[1], r[3] *= 1e-3;
  std::vector<double> y;
  for (const auto& r : X) y.push_back(0.01 * r[1] + 300.0 * r[3]);
  Hyperparams hp;
  hp.gamma = 0.3;
  const auto raw = train_svr(X, y, hp, "");

  Matrix Z;
  for (const auto& r : X) Z.push_back(raw.model.standardize(r));
  TrainOptions identity;
  identity.standardize = false;
  const auto pre = train_svr(Z, y, hp, "", identity);
  for (double v : pre.model.feature_means) EXPECT_EQ(v, 0.0);
  for (double v : pre.model.feature_stds) EXPECT_EQ(v, 1.0);
  for (std::size_t i = 0; i < X.size(); ++i)
    EXPECT_NEAR(raw.model.decision(X[i]), pre.model.decision(Z[i]), 1e-6);
}

TEST(Svr, ConstantTargetsGiveConstantModel) {
  const Matrix X{{1}, {2}, {3}};
  const std::vector<double> y{4, 4, 4};
  const auto fit = train_svr(X, y, {}, "");
  EXPECT_TRUE(fit.model.support_vectors.empty());
  EXPECT_EQ(fit.model.decision(std::vector<double>{17.0}), 4.0);
}

TEST(Svr, InputErrors) {
  expect_error(Errc::DimensionMismatch, [] {
    train_svr({{1, 2}, {3}}, std::vector<double>{1, 2}, {}, "");
  });
  expect_error(Errc::DimensionMismatch, [] { train_svr({{1}, {2}}, std::vector<double>{1}, {}, ""); });
  expect_error(Errc::InsufficientData, [] { train_svr({}, std::vector<double>{}, {}, ""); });
  Hyperparams bad;
  bad.C = 0.0;
  expect_error(Errc::ConfigError, [&] { train_svr({{1}, {2}}, std::vector<double>{1, 2}, bad, ""); });
}

TEST(Predict, ZeroCoefficientsGiveBias) {
  EngagementModel m;
  m.bias_term = 2.5;
  m.feature_means = {0, 0};
  m.feature_stds = {1, 1};
  m.registry_hash = "abc";
  EXPECT_EQ(predict(m, {"abc", {7.0, -3.0}}), 2.5);
  expect_error(Errc::RegistryMismatch, [&] { predict(m, {"xyz", {7.0, -3.0}}); });
  expect_error(Errc::DimensionMismatch, [&] { predict(m, {"abc", {7.0}}); });
}

TEST(Predict, Deterministic) {
  std::mt19937_64 rng(15);
  const auto X = random_matrix(30, 5, rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(r[0]);
  const auto fit = train_svr(X, y, {}, "h");
  const aesthetics::FeatureVector fv{"h", X[3]};
  const double a = predict(fit.model, fv);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(predict(fit.model, fv), a);
}

TEST(Quartiles, ExactQuartiles) {
  std::map<std::string, double> scores;
  for (int i = 1; i <= 8; ++i) scores["p" + std::to_string(i)] = i;
  const auto l = quartile_labels(scores);
  EXPECT_EQ(l.unsuccessful_ids, (std::vector<std::string>{"p1", "p2"}));
  EXPECT_EQ(l.successful_ids, (std::vector<std::string>{"p7", "p8"}));
  EXPECT_DOUBLE_EQ(l.lower_threshold, 2.75);
  EXPECT_DOUBLE_EQ(l.upper_threshold, 6.25);
}

TEST(Quartiles, Errors) {
  std::map<std::string, double> same;
  for (int i = 0; i < 12; ++i) same["p" + std::to_string(i)] = 3.0;
  expect_error(Errc::DegenerateQuartiles, [&] { quartile_labels(same); });
  std::map<std::string, double> few{{"a", 1}, {"b", 2}, {"c", 3}};
  expect_error(Errc::TooFewScores, [&] { quartile_labels(few); });
}

TEST(Quartiles, BalancedAndDisjointOnDistinctScores) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> scores;
    const std::size_t n = 8 + rng() % 200;
    for (std::size_t i = 0; i < n; ++i) scores["id" + std::to_string(i)] = u(rng);
    const auto l = quartile_labels(scores);
    EXPECT_EQ(l.successful_ids.size(), l.unsuccessful_ids.size()) << "n = " << n;
    for (const auto& id : l.successful_ids) {
      EXPECT_GT(scores[id], l.upper_threshold);
      EXPECT_EQ(std::count(l.unsuccessful_ids.begin(), l.unsuccessful_ids.end(), id), 0);
    }
    for (const auto& id : l.unsuccessful_ids) EXPECT_LT(scores[id], l.lower_threshold);
    EXPECT_LE(l.successful_ids.size() + l.unsuccessful_ids.size(), n / 2 + 2);
  }
}

TEST(Svc, SeparablePair) {
  const Matrix X{{0.0, 1.0}, {2.0, -1.0}};
  const std::vector<int> labels{1, -1};
  const auto fit = train_svc(X, labels, {}, "");
  EXPECT_EQ(classify(fit.model, X[0]), 1);
  EXPECT_EQ(classify(fit.model, X[1]), -1);
}

TEST(Svc, Xor) {
  const Matrix X{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  const std::vector<int> labels{1, 1, -1, -1};
  Hyperparams hp;
  hp.C = 100.0;
  hp.gamma = 1.0;
  const auto fit = train_svc(X, labels, hp, "");
  EXPECT_TRUE(fit.report.converged);
  EXPECT_EQ(*evaluate_classifier(fit.model, X, labels).accuracy, 1.0);
  EXPECT_LE(svc_kkt_violation(fit, X, labels), kTol);
}

TEST(Svc, KktAuditOnRandomProblems) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng() % 100;
    const auto X = random_matrix(n, 1 + rng() % 5, rng);
    auto labels = linear_labels(X, rng, 0.5);
    labels[0] = 1, labels[1] = -1;
    Hyperparams hp;
    hp.C = std::pow(10.0, static_cast<double>(rng() % 4) - 1.0);
    hp.kernel = trial % 3 == 0 ? KernelKind::Linear : KernelKind::Rbf;
    const auto fit = train_svc(X, labels, hp, "");
    ASSERT_TRUE(fit.report.converged);
    EXPECT_LE(svc_kkt_violation(fit, X, labels), kTol + 1e-9) << "trial " << trial;
    for (double c : fit.coefficients) EXPECT_LE(std::fabs(c), hp.C);
  }
}

TEST(Svc, FlippingLabelsFlipsDecisions) {
  std::mt19937_64 rng(18);
  const auto X = random_matrix(60, 3, rng);
  auto labels = linear_labels(X, rng, 0.3);
  // Both runs solved tightly so they reach the same optimum from different
  // SMO paths.
  TrainOptions tight;
  tight.tol = 1e-10;
  const auto a = train_svc(X, labels, {}, "", tight);
  for (auto& l : labels) l = -l;
  const auto b = train_svc(X, labels, {}, "", tight);
  const auto probes = random_matrix(100, 3, rng);
  for (const auto& p : probes) {
    const double fa = a.model.decision(p), fb = b.model.decision(p);
    EXPECT_NEAR(fa, -fb, 1e-7);
    if (std::fabs(fa) > 1e-7) EXPECT_EQ(classify(a.model, p), -classify(b.model, p));
  }
}

TEST(Svc, Errors) {
  expect_error(Errc::SingleClass, [] { train_svc({{1}, {2}}, std::vector<int>{1, 1}, {}, ""); });
  expect_error(Errc::SchemaError, [] { train_svc({{1}, {2}}, std::vector<int>{1, 0}, {}, ""); });
}

TEST(Evaluate, PerfectAndConstantClassifiers) {
  std::mt19937_64 rng(19);
  const auto X = random_matrix(40, 2, rng);
  std::vector<int> labels;
  for (const auto& r : X) labels.push_back(r[0] > 0 ? 1 : -1);
  Hyperparams hp;
  hp.C = 1e4;
  hp.kernel = KernelKind::Linear;
  const auto fit = train_svc(X, labels, hp, "");
  const auto rep = evaluate_classifier(fit.model, X, labels);
  EXPECT_EQ(*rep.accuracy, 1.0);
  EXPECT_EQ(rep.confusion->fp + rep.confusion->fn, 0u);

  EngagementModel constant;
  constant.kind = ModelKind::Svc;
  constant.bias_term = 1.0;
  constant.feature_means = {0, 0};
  constant.feature_stds = {1, 1};
  const Matrix B{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const std::vector<int> balanced{1, -1, 1, -1};
  const auto c = evaluate_classifier(constant, B, balanced);
  EXPECT_EQ(*c.accuracy, 0.5);
  EXPECT_EQ(c.confusion->tp, 2u);
  EXPECT_EQ(c.confusion->fp, 2u);
  expect_error(Errc::EmptyTestSet, [&] { evaluate_classifier(constant, {}, std::vector<int>{}); });
  expect_error(Errc::EmptyTestSet, [&] { evaluate_regressor(constant, {}, std::vector<double>{}); });
}

TEST(Evaluate, SignificanceFindsPlantedFeatures) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    const auto X = random_matrix(300, 40, rng);
    std::normal_distribution<double> nd(0.0, 0.3);
    std::vector<int> labels;
    for (const auto& r : X) labels.push_back(1.5 * r[7] - r[23] + nd(rng) > 0 ? 1 : -1);
    Hyperparams hp;
    hp.kernel = KernelKind::Linear;
    hp.C = 1.0;
    const auto fit = train_svc(X, labels, hp, "");
    std::vector<std::string> ids;
    for (int k = 0; k < 40; ++k) ids.push_back("f" + std::to_string(k));
    const auto top = linear_significance(fit.model, ids);
    ASSERT_EQ(top.size(), 5u);
    std::vector<std::string> names;
    for (const auto& t : top) names.push_back(t.feature);
    EXPECT_NE(std::find(names.begin(), names.end(), "f7"), names.end());
    EXPECT_NE(std::find(names.begin(), names.end(), "f23"), names.end());
    EXPECT_GT(top[0].weight * (top[0].feature == "f23" ? -1 : 1), 0.0);
  }
  EngagementModel rbf;
  rbf.feature_means = {0};
  rbf.feature_stds = {1};
  const std::vector<std::string> one{"a"};
  expect_error(Errc::ConfigError, [&] { linear_significance(rbf, one); });
}

TEST(ModelJson, RoundTrip) {
  std::mt19937_64 rng(21);
  const auto X = random_matrix(30, 4, rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(r[1] + r[2] * r[3]);
  const auto fit = train_svr(X, y, {}, "hash1");
  const auto j = model_to_json(fit.model);
  EXPECT_EQ(j.at("version"), 1);
  EXPECT_EQ(j.at("kind"), "svr");
  EXPECT_EQ(j.at("kernel").at("kind"), "rbf");
  const auto back = model_from_json(nlohmann::json::parse(j.dump()));
  for (const auto& r : X) EXPECT_EQ(back.decision(r), fit.model.decision(r));
  EXPECT_EQ(back.registry_hash, "hash1");

  auto bad = j;
  bad["version"] = 2;
  expect_error(Errc::SchemaError, [&] { model_from_json(bad); });
  bad = j;
  bad["alpha"].push_back(1.0);
  expect_error(Errc::SchemaError, [&] { model_from_json(bad); });
  bad = j;
  bad.erase("b");
  expect_error(Errc::SchemaError, [&] { model_from_json(bad); });
  bad = j;
  bad["kernel"]["kind"] = "poly";
  expect_error(Errc::SchemaError, [&] { model_from_json(bad); });
}

TEST(GridSearch, ScoresEveryPointAndPicksLowest) {
  std::mt19937_64 rng(22);
  const auto X = random_matrix(60, 2, rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(std::sin(2.0 * r[0]));
  std::vector<Hyperparams> grid(3);
  grid[0].C = 0.01;
  grid[1].C = 10.0;
  grid[2].C = 10.0;
  grid[2].gamma = 1e-4;
  const auto pts = grid_search_svr(X, y, grid, 5, 1);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(best_grid_point(pts).hp.C, 10.0);
  EXPECT_FALSE(best_grid_point(pts).hp.gamma.has_value());
  EXPECT_EQ(grid_search_svr(X, y, grid, 5, 1)[1].score, pts[1].score);

  std::vector<int> labels;
  for (const auto& r : X) labels.push_back(r[0] + r[1] > 0 ? 1 : -1);
  const auto cls = grid_search_svc(X, labels, grid, 5, 1);
  ASSERT_EQ(cls.size(), 3u);
  for (const auto& p : cls) {
    EXPECT_GE(p.score, 0.0);
    EXPECT_LE(p.score, 1.0);
  }
  expect_error(Errc::ConfigError, [] { best_grid_point({}); });
}
