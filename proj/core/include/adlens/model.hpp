#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adlens/aesthetics/features.hpp"

namespace adlens::model {

using Matrix = std::vector<std::vector<double>>;

enum class KernelKind { Rbf, Linear };

std::string to_string(KernelKind k);
KernelKind parse_kernel_kind(std::string_view s);

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 1.0;

  // rbf: exp(-gamma |a - b|^2); linear: a . b
  double operator()(std::span<const double> a, std::span<const double> b) const;
};

enum class ModelKind { Svr, Svc };

struct Hyperparams {
  double C = 10.0;
  double epsilon = 0.1;
  // Defaults to 1 / num_features (features are standardized to unit variance).
  std::optional<double> gamma;
  KernelKind kernel = KernelKind::Rbf;
};

struct TrainOptions {
  double tol = 1e-3;
  std::size_t max_iters = 10'000'000;
  // Off: train on the features as given (mean 0, std 1 constants).
  bool standardize = true;
  bool record_objective = false;
};

struct TrainReport {
  std::size_t iterations = 0;
  bool converged = false;
  // Max violating pair gap m(a) - M(a), recomputed from a fresh gradient.
  double max_kkt_violation = 0.0;
  std::vector<double> objective_history;
};

struct EngagementModel {
  ModelKind kind = ModelKind::Svr;
  KernelSpec kernel;
  double C = 10.0;
  double epsilon = 0.1;
  Matrix support_vectors;  // standardized
  std::vector<double> dual_coefs;
  double bias_term = 0.0;
  std::vector<double> feature_means;
  std::vector<double> feature_stds;
  std::string registry_hash;

  std::size_t num_features() const { return feature_means.size(); }
  std::vector<double> standardize(std::span<const double> x) const;
  // Kernel expansion on raw (unstandardized) features. No hash check.
  double decision(std::span<const double> x) const;
};

struct TrainResult {
  EngagementModel model;
  // Signed coefficient of every training row (zero for non-support vectors).
  std::vector<double> coefficients;
  TrainReport report;
};

// Epsilon-insensitive SVR solved by SMO with second-order working-set
// selection. Throws DimensionMismatch for ragged input or |X| != |y| and
// InsufficientData for fewer than 1 row. Constant targets return a constant
// model and a warning on stderr.
TrainResult train_svr(const Matrix& X, std::span<const double> y, const Hyperparams& hp,
                      const std::string& registry_hash, const TrainOptions& opts = {});

// C-SVM on labels in {-1, +1}. Throws SingleClass when only one label occurs.
TrainResult train_svc(const Matrix& X, std::span<const int> labels, const Hyperparams& hp,
                      const std::string& registry_hash, const TrainOptions& opts = {});

// Throws RegistryMismatch when the hashes differ.
double predict(const EngagementModel& m, const aesthetics::FeatureVector& x);
int classify(const EngagementModel& m, std::span<const double> x);

struct SuccessLabeling {
  std::vector<std::string> successful_ids;
  std::vector<std::string> unsuccessful_ids;
  double lower_threshold = 0.0;
  double upper_threshold = 0.0;
};

// Bottom quartile -> unsuccessful, top quartile -> successful; scores equal
// to a threshold are excluded. Throws TooFewScores (< 8 scores) and
// DegenerateQuartiles when a class ends up empty.
SuccessLabeling quartile_labels(const std::map<std::string, double>& scores);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct FeatureWeight {
  std::string feature;
  double weight = 0.0;
};

struct EvaluationReport {
  ModelKind kind = ModelKind::Svr;
  std::size_t n = 0;
  std::optional<double> accuracy;
  std::optional<Confusion> confusion;
  std::optional<double> rmse;
  std::optional<double> mae;
  std::vector<FeatureWeight> significance;
};

// Throws EmptyTestSet.
EvaluationReport evaluate_classifier(const EngagementModel& m, const Matrix& X,
                                     std::span<const int> labels);
EvaluationReport evaluate_regressor(const EngagementModel& m, const Matrix& X,
                                    std::span<const double> y);

// Primal weights of a linear-kernel model, ranked by |w| (ties by position).
// Throws ConfigError for a non-linear kernel.
std::vector<FeatureWeight> linear_significance(const EngagementModel& m,
                                               std::span<const std::string> feature_ids,
                                               std::size_t top = 5);

nlohmann::json evaluation_to_json(const EvaluationReport& r);

// {"version": 1, "kind", "kernel", "C", "epsilon", "sv", "alpha", "b",
//  "standardize": {"mean", "std"}, "registry_hash"}
nlohmann::json model_to_json(const EngagementModel& m);
// Throws SchemaError.
EngagementModel model_from_json(const nlohmann::json& j);

// Each grid point scored by mean K-fold validation RMSE (SVR) or error rate
// (SVC); lower is better. Folds come from a seeded shuffle, stratified by
// class for SVC.
struct GridPoint {
  Hyperparams hp;
  double score = 0.0;
};

// First grid point with the lowest score. Throws ConfigError on an empty grid.
const GridPoint& best_grid_point(std::span<const GridPoint> points);
std::vector<GridPoint> grid_search_svr(const Matrix& X, std::span<const double> y,
                                       std::span<const Hyperparams> grid, int folds,
                                       std::uint64_t seed, const TrainOptions& opts = {});
std::vector<GridPoint> grid_search_svc(const Matrix& X, std::span<const int> labels,
                                       std::span<const Hyperparams> grid, int folds,
                                       std::uint64_t seed, const TrainOptions& opts = {});

}  // namespace adlens::model
