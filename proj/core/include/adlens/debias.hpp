#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace adlens::debias {

// Per-bin additive smoothing applied before normalization.
inline constexpr double kBinEpsilon = 1e-9;

// Soft histogram over shared bin edges. The first and last bins are open
// ended: mass below the first interior edge (or above the last) is credited
// to them, so every score contributes exactly one unit of mass.
struct ScoreDistribution {
  std::vector<double> bin_edges;
  std::vector<double> probabilities;
  double bandwidth = 0.0;

  std::size_t bins() const { return probabilities.size(); }
};

// n_bins + 1 equally spaced edges covering [lo, hi].
std::vector<double> uniform_edges(double lo, double hi, std::size_t n_bins);

// Edges span [min - 3h, max + 3h]. Throws TooFewScores for fewer than 2 scores.
ScoreDistribution build_distribution(std::span<const double> scores, std::size_t n_bins,
                                     double bandwidth);

// Same kernel mass on caller-provided edges.
ScoreDistribution build_distribution_on(std::span<const double> scores,
                                        std::span<const double> edges, double bandwidth);

// Natural-log KL(p || q). Throws SupportMismatch when the edges differ.
double kl_divergence(const ScoreDistribution& p, const ScoreDistribution& q);

// 0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to sd when the IQR is 0.
double silverman_bandwidth(std::span<const double> scores);

// tau(y) = W0 + W1 u + ... + Wd u^d with u = (y - shift) / scale.
//
// W1..Wd are non-negative and W1 >= w_floor, so tau is strictly increasing on
// u >= 0. Below u = 0 the polynomial is continued by its tangent line at 0,
// which keeps the map strictly increasing on the whole real line.
struct PolynomialTransform {
  int degree = 1;
  std::vector<double> coefficients{0.0, 1.0};
  double shift = 0.0;
  double scale = 1.0;

  double premap(double y) const { return (y - shift) / scale; }
  double evaluate_premapped(double u) const;
  double operator()(double y) const { return evaluate_premapped(premap(y)); }
};

std::vector<double> apply_transform(const PolynomialTransform& t, std::span<const double> scores);

// Vandermonde design matrix: rows = degree + 1, cols = n, entry (p, i) = u_i^p.
struct DesignMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double operator()(std::size_t p, std::size_t i) const { return values[p * cols + i]; }
};

DesignMatrix make_design_matrix(std::span<const double> premapped, int degree);

// O = W^T X, evaluated without the negative-u tangent extension (the fit
// always works on u in [0, 1]).
std::vector<double> transform_outputs(std::span<const double> W, const DesignMatrix& X);

// J(W) = KL(p || soft-hist(W^T X)) on p's edges and bandwidth.
double kl_objective(std::span<const double> W, const DesignMatrix& X, const ScoreDistribution& p);

// Analytic dJ/dW through the Gaussian soft-bin assignments.
std::vector<double> kl_gradient(std::span<const double> W, const DesignMatrix& X,
                                const ScoreDistribution& p);

struct FitOptions {
  std::size_t n_bins = 50;
  std::optional<double> bandwidth;  // Silverman on the unbiased set when empty
  double learn_rate = 1.0;          // first trial step
  std::size_t max_iters = 1000;
  double w_floor = 1e-6;
  double tol = 1e-8;                // projected-gradient norm
  bool line_search = true;
};

struct FitReport {
  double identity_kl = 0.0;  // biased scores left untouched
  double initial_kl = 0.0;   // affine mean/spread-matching initialization
  double final_kl = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool not_worse = false;  // final_kl <= min(initial_kl, identity_kl)
  std::vector<double> kl_history;
};

struct FitResult {
  PolynomialTransform transform;
  FitReport report;
};

// Projected gradient descent on J(W). Throws TooFewScores (< 10 scores on
// either side or degree < 1) and NonFiniteLoss.
FitResult fit_transform(std::span<const double> unbiased, std::span<const double> biased,
                        int degree, const FitOptions& opts = {});

// Fits degrees 1..max_degree and keeps the smallest degree whose successor
// improves final KL by no more than `min_improvement`.
FitResult fit_transform_auto(std::span<const double> unbiased, std::span<const double> biased,
                             int max_degree, const FitOptions& opts = {},
                             double min_improvement = 1e-3);

nlohmann::json transform_to_json(const std::string& bias, const FitResult& fit);
PolynomialTransform transform_from_json(const nlohmann::json& j);

}  // namespace adlens::debias
