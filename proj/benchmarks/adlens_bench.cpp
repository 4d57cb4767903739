#include <random>

#include <benchmark/benchmark.h>

#include "adlens/aesthetics/features.hpp"
#include "adlens/debias.hpp"
#include "adlens/model.hpp"
#include "adlens/synthetic.hpp"
#include "adlens/tuner.hpp"

using namespace adlens;

namespace {

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> xs(n);
  for (auto& x : xs) x = nd(rng);
  return xs;
}

void BM_ExtractFeatures(benchmark::State& state) {
  std::mt19937_64 rng(1);
  auto recipe = synthetic::random_recipe(rng);
  recipe.width = static_cast<int>(state.range(0));
  recipe.height = static_cast<int>(state.range(0) * 3 / 4);
  const auto img = synthetic::render(recipe);
  const auto registry = aesthetics::FeatureRegistry::standard();
  for (auto _ : state) benchmark::DoNotOptimize(aesthetics::extract_features(img, registry));
}
BENCHMARK(BM_ExtractFeatures)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_KlGradient(benchmark::State& state) {
  const auto p = debias::build_distribution(normal_draws(5000, 1), 50, 0.2);
  std::vector<double> u(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0, 1);
  for (auto& x : u) x = unit(rng);
  const auto X = debias::make_design_matrix(u, 3);
  const std::vector<double> W{-1.0, 1.0, 0.5, 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(debias::kl_gradient(W, X, p));
}
BENCHMARK(BM_KlGradient)->Arg(1000)->Arg(5000);

void BM_FitTransform(benchmark::State& state) {
  const auto unbiased = normal_draws(2000, 3);
  auto biased = normal_draws(2000, 4);
  for (auto& y : biased) y = 2 * y + 3;
  for (auto _ : state) benchmark::DoNotOptimize(debias::fit_transform(unbiased, biased, 3));
}
BENCHMARK(BM_FitTransform)->Unit(benchmark::kMillisecond);

model::Matrix random_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  model::Matrix X(n, std::vector<double>(d));
  for (auto& r : X)
    for (auto& v : r) v = nd(rng);
  return X;
}

void BM_TrainSvr(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto X = random_rows(static_cast<std::size_t>(state.range(0)), 43, rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(r[0] - 0.5 * r[1] + 0.3 * r[2] * r[3]);
  for (auto _ : state) benchmark::DoNotOptimize(model::train_svr(X, y, {}, ""));
}
BENCHMARK(BM_TrainSvr)->Arg(200)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_TunerSuggest(benchmark::State& state) {
  const auto registry = aesthetics::FeatureRegistry::standard();
  std::mt19937_64 rng(6);
  const auto X = random_rows(300, registry.size(), rng);
  std::vector<double> y;
  for (const auto& r : X) y.push_back(r[0] + r[5] - r[9]);
  const auto m = model::train_svr(X, y, {}, registry.hash()).model;
  const aesthetics::FeatureVector x{registry.hash(), X[0]};
  tuner::TunerParams p;
  p.k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tuner::suggest(m, registry, x, p));
}
BENCHMARK(BM_TunerSuggest)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
