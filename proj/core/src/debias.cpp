#include "adlens/debias.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adlens/error.hpp"
#include "adlens/stats.hpp"

namespace adlens::debias {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Kernel support in bandwidths; beyond it the normal CDF is 0 or 1 to double precision.
constexpr double kKernelReach = 9.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Interior edge indices [lo, hi] (1-based among edges 1..K-1) whose kernel
// CDF is neither 0 nor 1 for a point at `x`.
std::pair<std::size_t, std::size_t> active_edges(std::span<const double> edges, double x, double h) {
  const std::size_t K = edges.size() - 1;
  const auto first = std::upper_bound(edges.begin() + 1, edges.end() - 1, x - kKernelReach * h);
  const auto last = std::lower_bound(edges.begin() + 1, edges.end() - 1, x + kKernelReach * h);
  const auto lo = static_cast<std::size_t>(first - edges.begin());
  const auto hi = static_cast<std::size_t>(last - edges.begin());  // one past the last active edge
  return {std::min(lo, K), hi};
}

// Adds one unit of Gaussian mass centered at x to `mass`.
void deposit(std::span<const double> edges, double x, double h, std::span<double> mass) {
  const std::size_t K = mass.size();
  const auto [lo, hi] = active_edges(edges, x, h);
  // CDF at edge j: 0 for j < lo, 1 for j >= hi (j interior), open ends at 0 and K.
  double prev = 0.0;  // CDF at edge lo - 1 (or the open lower end)
  for (std::size_t j = lo; j < hi; ++j) {
    const double c = normal_cdf((edges[j] - x) / h);
    mass[j - 1] += c - prev;
    prev = c;
  }
  // Everything above the last active edge falls into bin hi - 1.
  mass[std::min(hi - 1, K - 1)] += 1.0 - prev;
}

std::vector<double> soft_mass(std::span<const double> values, std::span<const double> edges,
                              double h) {
  std::vector<double> mass(edges.size() - 1, 0.0);
  for (double x : values) deposit(edges, x, h, mass);
  return mass;
}

// Mass sums to the number of scores; smoothing is applied to the normalized
// mass so the result depends on the score distribution only, not on n.
ScoreDistribution normalized(std::vector<double> mass, std::span<const double> edges, double h) {
  ScoreDistribution d;
  d.bin_edges.assign(edges.begin(), edges.end());
  d.bandwidth = h;
  const double n = std::accumulate(mass.begin(), mass.end(), 0.0);
  const double total = 1.0 + kBinEpsilon * static_cast<double>(mass.size());
  for (auto& m : mass) m = (m / n + kBinEpsilon) / total;
  d.probabilities = std::move(mass);
  return d;
}

constexpr double kStallTolerance = 1e-12;
constexpr int kStallWindow = 10;

std::vector<double> project(std::vector<double> W, double w_floor) {
  // W0 is an unconstrained offset; it never affects ordering.
  if (W.size() > 1) W[1] = std::max(W[1], w_floor);
  for (std::size_t p = 2; p < W.size(); ++p) W[p] = std::max(W[p], 0.0);
  return W;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

std::vector<double> uniform_edges(double lo, double hi, std::size_t n_bins) {
  std::vector<double> edges(n_bins + 1);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i <= n_bins; ++i) edges[i] = lo + width * static_cast<double>(i);
  edges.back() = hi;
  return edges;
}

ScoreDistribution build_distribution(std::span<const double> scores, std::size_t n_bins,
                                     double bandwidth) {
  if (scores.size() < 2) throw Error(Errc::TooFewScores, "distribution needs at least 2 scores");
  if (!(bandwidth > 0.0) || n_bins == 0)
    throw Error(Errc::NonFiniteLoss, "bandwidth and bin count must be positive");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const auto edges = uniform_edges(*lo - 3.0 * bandwidth, *hi + 3.0 * bandwidth, n_bins);
  return build_distribution_on(scores, edges, bandwidth);
}

ScoreDistribution build_distribution_on(std::span<const double> scores,
                                        std::span<const double> edges, double bandwidth) {
  if (edges.size() < 2) throw Error(Errc::SupportMismatch, "need at least one bin");
  return normalized(soft_mass(scores, edges, bandwidth), edges, bandwidth);
}

double kl_divergence(const ScoreDistribution& p, const ScoreDistribution& q) {
  if (p.bin_edges != q.bin_edges || p.probabilities.size() != q.probabilities.size())
    throw Error(Errc::SupportMismatch, "distributions do not share bin edges");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i];
    if (pi > 0.0) kl += pi * std::log(pi / q.probabilities[i]);
  }
  return std::max(kl, 0.0);
}

double silverman_bandwidth(std::span<const double> scores) {
  const double sd = stats::stddev(scores);
  const double iqr = stats::percentile(scores, 0.75) - stats::percentile(scores, 0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) spread = 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(scores.size()), -0.2);
}

double PolynomialTransform::evaluate_premapped(double u) const {
  if (u < 0.0) {
    const double w1 = coefficients.size() > 1 ? coefficients[1] : 0.0;
    return coefficients[0] + w1 * u;
  }
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * u + *it;
  return acc;
}

std::vector<double> apply_transform(const PolynomialTransform& t, std::span<const double> scores) {
  std::vector<double> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), [&](double y) { return t(y); });
  return out;
}

DesignMatrix make_design_matrix(std::span<const double> premapped, int degree) {
  DesignMatrix X;
  X.rows = static_cast<std::size_t>(degree) + 1;
  X.cols = premapped.size();
  X.values.assign(X.rows * X.cols, 1.0);
  for (std::size_t p = 1; p < X.rows; ++p)
    for (std::size_t i = 0; i < X.cols; ++i)
      X.values[p * X.cols + i] = X.values[(p - 1) * X.cols + i] * premapped[i];
  return X;
}

std::vector<double> transform_outputs(std::span<const double> W, const DesignMatrix& X) {
  std::vector<double> O(X.cols, 0.0);
  for (std::size_t p = 0; p < X.rows; ++p)
    for (std::size_t i = 0; i < X.cols; ++i) O[i] += W[p] * X(p, i);
  return O;
}

double kl_objective(std::span<const double> W, const DesignMatrix& X, const ScoreDistribution& p) {
  const auto O = transform_outputs(W, X);
  const auto q = normalized(soft_mass(O, p.bin_edges, p.bandwidth), p.bin_edges, p.bandwidth);
  return kl_divergence(p, q);
}

std::vector<double> kl_gradient(std::span<const double> W, const DesignMatrix& X,
                                const ScoreDistribution& p) {
  const auto O = transform_outputs(W, X);
  const auto& edges = p.bin_edges;
  const double h = p.bandwidth;
  const auto mass = soft_mass(O, edges, h);
  // Q_k = (m_k / n + eps) / (1 + K eps) and sum_k m_k = n regardless of W, hence
  // dJ/dO_i = -sum_k r_k dm_k/dO_i with r_k = P_k / (m_k + n eps).
  const double n = static_cast<double>(X.cols);
  std::vector<double> r(mass.size());
  for (std::size_t k = 0; k < mass.size(); ++k)
    r[k] = p.probabilities[k] / (mass[k] + n * kBinEpsilon);

  std::vector<double> grad(X.rows, 0.0);
  for (std::size_t i = 0; i < X.cols; ++i) {
    const auto [lo, hi] = active_edges(edges, O[i], h);
    double dJ_dO = 0.0;
    // Interior edge j separates bin j-1 (below) from bin j (above).
    for (std::size_t j = lo; j < hi; ++j)
      dJ_dO -= normal_pdf((edges[j] - O[i]) / h) * (r[j] - r[j - 1]);
    dJ_dO /= h;
    for (std::size_t q = 0; q < X.rows; ++q) grad[q] += dJ_dO * X(q, i);
  }
  return grad;
}

FitResult fit_transform(std::span<const double> unbiased, std::span<const double> biased,
                        int degree, const FitOptions& opts) {
  if (unbiased.size() < 10 || biased.size() < 10)
    throw Error(Errc::TooFewScores, "fit needs at least 10 unbiased and 10 biased scores");
  if (degree < 1) throw Error(Errc::TooFewScores, "degree must be >= 1");

  const double h = opts.bandwidth.value_or(silverman_bandwidth(unbiased));
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(Errc::NonFiniteLoss, "bandwidth must be positive");
  const auto P = build_distribution(unbiased, opts.n_bins, h);

  FitResult result;
  auto& t = result.transform;
  auto& rep = result.report;
  t.degree = degree;
  const auto [bmin, bmax] = std::minmax_element(biased.begin(), biased.end());
  t.shift = *bmin;
  t.scale = *bmax > *bmin ? *bmax - *bmin : 1.0;

  std::vector<double> u(biased.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = t.premap(biased[i]);
  const auto X = make_design_matrix(u, degree);
  const auto n_coef = static_cast<std::size_t>(degree) + 1;

  auto objective = [&](const std::vector<double>& W) {
    const double J = kl_objective(W, X, P);
    if (!std::isfinite(J)) throw Error(Errc::NonFiniteLoss, "KL objective is not finite");
    return J;
  };

  std::vector<double> identity(n_coef, 0.0);
  identity[0] = t.shift;
  identity[1] = t.scale;
  identity = project(identity, opts.w_floor);

  std::vector<double> affine(n_coef, 0.0);
  const double su = stats::stddev(u);
  affine[1] = su > 0.0 ? stats::stddev(unbiased) / su : 1.0;
  affine[0] = stats::mean(unbiased) - affine[1] * stats::mean(u);
  affine = project(affine, opts.w_floor);

  rep.identity_kl = objective(identity);
  rep.initial_kl = objective(affine);

  std::vector<double> W = rep.initial_kl <= rep.identity_kl ? affine : identity;
  double J = std::min(rep.initial_kl, rep.identity_kl);
  rep.kl_history.push_back(J);
  auto g = kl_gradient(W, X, P);
  double step = opts.learn_rate;
  int flat_steps = 0;

  for (rep.iterations = 0; rep.iterations < opts.max_iters; ++rep.iterations) {
    std::vector<double> trial(n_coef);
    for (std::size_t q = 0; q < n_coef; ++q) trial[q] = W[q] - g[q];
    trial = project(trial, opts.w_floor);
    double pg_norm = 0.0;
    for (std::size_t q = 0; q < n_coef; ++q) pg_norm += (trial[q] - W[q]) * (trial[q] - W[q]);
    if (std::sqrt(pg_norm) < opts.tol) {
      rep.converged = true;
      break;
    }

    std::vector<double> next;
    double J_next = J;
    bool accepted = false;
    double alpha = step;
    for (int attempt = 0; attempt < 60; ++attempt, alpha *= 0.5) {
      next.resize(n_coef);
      for (std::size_t q = 0; q < n_coef; ++q) next[q] = W[q] - alpha * g[q];
      next = project(next, opts.w_floor);
      J_next = objective(next);
      if (!opts.line_search) {
        accepted = true;
        break;
      }
      std::vector<double> d(n_coef);
      for (std::size_t q = 0; q < n_coef; ++q) d[q] = next[q] - W[q];
      if (J_next <= J + 1e-4 * dot(g, d)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the projected arc: W is stationary to working precision.
      rep.converged = true;
      break;
    }

    auto g_next = kl_gradient(next, X, P);
    if (opts.line_search) {
      // Barzilai-Borwein trial step for the next iteration.
      double ss = 0.0, sy = 0.0;
      for (std::size_t q = 0; q < n_coef; ++q) {
        const double s = next[q] - W[q];
        const double y = g_next[q] - g[q];
        ss += s * s;
        sy += s * y;
      }
      step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::max(alpha * 2.0, opts.learn_rate);
    }
    const bool flat = J - J_next <= kStallTolerance * std::max(J, 1e-12);
    W = std::move(next);
    J = J_next;
    g = std::move(g_next);
    rep.kl_history.push_back(J);
    flat_steps = flat ? flat_steps + 1 : 0;
    if (flat_steps >= kStallWindow) {
      rep.converged = true;
      ++rep.iterations;
      break;
    }
  }

  t.coefficients = W;
  rep.final_kl = J;
  rep.not_worse = rep.final_kl <= std::min(rep.initial_kl, rep.identity_kl);
  return result;
}

FitResult fit_transform_auto(std::span<const double> unbiased, std::span<const double> biased,
                             int max_degree, const FitOptions& opts, double min_improvement) {
  auto best = fit_transform(unbiased, biased, 1, opts);
  for (int d = 2; d <= max_degree; ++d) {
    auto next = fit_transform(unbiased, biased, d, opts);
    if (best.report.final_kl - next.report.final_kl <= min_improvement) break;
    best = std::move(next);
  }
  return best;
}

nlohmann::json transform_to_json(const std::string& bias, const FitResult& fit) {
  return {{"bias", bias},
          {"degree", fit.transform.degree},
          {"W", fit.transform.coefficients},
          {"shift", fit.transform.shift},
          {"scale", fit.transform.scale},
          {"final_kl", fit.report.final_kl},
          {"initial_kl", fit.report.initial_kl},
          {"identity_kl", fit.report.identity_kl},
          {"iterations", fit.report.iterations}};
}

PolynomialTransform transform_from_json(const nlohmann::json& j) {
  PolynomialTransform t;
  try {
    t.degree = j.at("degree").get<int>();
    t.coefficients = j.at("W").get<std::vector<double>>();
    t.shift = j.at("shift").get<double>();
    t.scale = j.at("scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, std::string("transform artifact: ") + e.what());
  }
  if (t.degree < 1 || t.coefficients.size() != static_cast<std::size_t>(t.degree) + 1 ||
      !(t.scale > 0.0))
    throw Error(Errc::SchemaError, "transform artifact is inconsistent");
  return t;
}

}  // namespace adlens::debias
