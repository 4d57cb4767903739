#include "adlens/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "adlens/error.hpp"
#include "adlens/stats.hpp"

namespace adlens::model {

using nlohmann::json;

namespace {

constexpr double kTau = 1e-12;
constexpr double kStdFloor = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Q(i, j) = s_i s_j K(row_i, row_j) over an index map into the kernel matrix.
class QMatrix {
 public:
  QMatrix(const std::vector<double>& kernel, std::size_t n, std::vector<int> sign,
          std::vector<std::size_t> row)
      : k_(kernel), n_(n), sign_(std::move(sign)), row_(std::move(row)) {}

  std::size_t size() const { return sign_.size(); }
  int sign(std::size_t i) const { return sign_[i]; }
  double operator()(std::size_t i, std::size_t j) const {
    return sign_[i] * sign_[j] * k_[row_[i] * n_ + row_[j]];
  }

 private:
  const std::vector<double>& k_;
  std::size_t n_;
  std::vector<int> sign_;
  std::vector<std::size_t> row_;
};

struct Solution {
  std::vector<double> alpha;
  double rho = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double violation = 0.0;
  std::vector<double> objective_history;
};

// min 0.5 a'Qa + p'a  s.t.  y'a = 0, 0 <= a <= C  (y = Q's signs).
class Solver {
 public:
  Solver(const QMatrix& q, std::vector<double> p, double c)
      : q_(q), p_(std::move(p)), c_(c), alpha_(q.size(), 0.0), g_(p_), qd_(q.size()) {
    for (std::size_t i = 0; i < q_.size(); ++i) qd_[i] = q_(i, i);
  }

  Solution run(const TrainOptions& opts) {
    Solution out;
    while (true) {
      std::size_t i = 0, j = 0;
      double gap = 0.0;
      if (!select(opts.tol, i, j, gap)) {
        // Guard against drift in the incrementally updated gradient.
        refresh_gradient();
        if (!select(opts.tol, i, j, gap)) {
          out.converged = true;
          break;
        }
      }
      if (out.iterations >= opts.max_iters) break;
      update(i, j);
      ++out.iterations;
      if (opts.record_objective) out.objective_history.push_back(objective());
    }
    refresh_gradient();
    out.violation = max_violation();
    out.rho = rho();
    out.alpha = alpha_;
    return out;
  }

 private:
  bool upper(std::size_t t) const { return alpha_[t] >= c_; }
  bool lower(std::size_t t) const { return alpha_[t] <= 0.0; }
  bool in_up(std::size_t t) const { return q_.sign(t) > 0 ? !upper(t) : !lower(t); }
  bool in_low(std::size_t t) const { return q_.sign(t) > 0 ? !lower(t) : !upper(t); }

  void refresh_gradient() {
    const std::size_t l = q_.size();
    for (std::size_t i = 0; i < l; ++i) {
      double s = p_[i];
      for (std::size_t j = 0; j < l; ++j)
        if (alpha_[j] != 0.0) s += q_(i, j) * alpha_[j];
      g_[i] = s;
    }
  }

  double objective() const {
    double v = 0.0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) v += alpha_[i] * (g_[i] + p_[i]);
    return 0.5 * v;
  }

  double max_violation() const {
    double m = -kInf, big_m = kInf;
    for (std::size_t t = 0; t < q_.size(); ++t) {
      const double v = -q_.sign(t) * g_[t];
      if (in_up(t)) m = std::max(m, v);
      if (in_low(t)) big_m = std::min(big_m, v);
    }
    return (m == -kInf || big_m == kInf) ? 0.0 : std::max(0.0, m - big_m);
  }

  // Second-order working set selection; false when the max violating pair
  // gap is below tol.
  bool select(double tol, std::size_t& out_i, std::size_t& out_j, double& gap) const {
    const std::size_t l = q_.size();
    double gmax = -kInf;
    std::size_t i = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (!in_up(t)) continue;
      const double v = -q_.sign(t) * g_[t];
      if (v >= gmax) {
        gmax = v;
        i = t;
      }
    }
    if (i == l) return false;
    double gmax2 = -kInf;
    double best_obj = kInf;
    std::size_t j = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (!in_low(t)) continue;
      const double v = q_.sign(t) * g_[t];
      gmax2 = std::max(gmax2, v);
      const double grad_diff = gmax + v;
      if (grad_diff > 0.0) {
        double quad = qd_[i] + qd_[t] - 2.0 * q_.sign(i) * q_.sign(t) * q_(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    gap = gmax + gmax2;
    if (gap < tol || j == l) return false;
    out_i = i;
    out_j = j;
    return true;
  }

  void update(std::size_t i, std::size_t j) {
    const double qij = q_(i, j);
    const double old_i = alpha_[i], old_j = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    const double c = c_;
    if (q_.sign(i) != q_.sign(j)) {
      double quad = qd_[i] + qd_[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g_[i] - g_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) aj = 0.0, ai = diff;
      } else {
        if (ai < 0.0) ai = 0.0, aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > c) ai = c, aj = c - diff;
      } else {
        if (aj > c) aj = c, ai = c + diff;
      }
    } else {
      double quad = qd_[i] + qd_[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g_[i] - g_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) ai = c, aj = sum - c;
      } else {
        if (aj < 0.0) aj = 0.0, ai = sum;
      }
      if (sum > c) {
        if (aj > c) aj = c, ai = sum - c;
      } else {
        if (ai < 0.0) ai = 0.0, aj = sum;
      }
    }
    const double di = ai - old_i, dj = aj - old_j;
    for (std::size_t k = 0; k < q_.size(); ++k) g_[k] += q_(k, i) * di + q_(k, j) * dj;
  }

  double rho() const {
    double ub = kInf, lb = -kInf, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < q_.size(); ++t) {
      const double yg = q_.sign(t) * g_[t];
      if (upper(t)) {
        if (q_.sign(t) < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (lower(t)) {
        if (q_.sign(t) > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    if (n_free > 0) return sum_free / static_cast<double>(n_free);
    if (ub == kInf) return lb;
    if (lb == -kInf) return ub;
    return 0.5 * (ub + lb);
  }

  const QMatrix& q_;
  std::vector<double> p_;
  double c_;
  std::vector<double> alpha_;
  std::vector<double> g_;
  std::vector<double> qd_;
};

void check_matrix(const Matrix& X, std::size_t rows) {
  if (X.empty()) throw Error(Errc::InsufficientData, "training set is empty");
  if (X.size() != rows)
    throw Error(Errc::DimensionMismatch, "feature rows and targets differ in count");
  const std::size_t d = X.front().size();
  for (const auto& r : X) {
    if (r.size() != d) throw Error(Errc::DimensionMismatch, "feature rows differ in length");
    for (double v : r)
      if (!std::isfinite(v)) throw Error(Errc::SchemaError, "feature value is not finite");
  }
}

EngagementModel base_model(const Matrix& X, ModelKind kind, const Hyperparams& hp,
                           const std::string& hash, const TrainOptions& opts) {
  EngagementModel m;
  m.kind = kind;
  m.C = hp.C;
  m.epsilon = kind == ModelKind::Svr ? hp.epsilon : 0.0;
  m.registry_hash = hash;
  const std::size_t d = X.front().size();
  m.kernel.kind = hp.kernel;
  m.kernel.gamma = hp.gamma.value_or(d > 0 ? 1.0 / static_cast<double>(d) : 1.0);
  if (!(m.C > 0.0)) throw Error(Errc::ConfigError, "C must be positive");
  if (!(m.kernel.gamma > 0.0)) throw Error(Errc::ConfigError, "gamma must be positive");
  if (kind == ModelKind::Svr && !(m.epsilon >= 0.0))
    throw Error(Errc::ConfigError, "epsilon must be non-negative");
  m.feature_means.assign(d, 0.0);
  m.feature_stds.assign(d, 1.0);
  if (opts.standardize) {
    std::vector<double> col(X.size());
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t i = 0; i < X.size(); ++i) col[i] = X[i][k];
      m.feature_means[k] = stats::mean(col);
      m.feature_stds[k] = std::max(stats::stddev(col), kStdFloor);
    }
  }
  return m;
}

std::vector<double> kernel_matrix(const EngagementModel& m, const Matrix& Z) {
  const std::size_t n = Z.size();
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = m.kernel(Z[i], Z[j]);
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }
  return k;
}

void keep_support_vectors(EngagementModel& m, const Matrix& Z, const std::vector<double>& coef) {
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (coef[i] == 0.0) continue;
    m.support_vectors.push_back(Z[i]);
    m.dual_coefs.push_back(coef[i]);
  }
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

std::string kind_name(ModelKind k) { return k == ModelKind::Svr ? "svr" : "svc"; }

}  // namespace

std::string to_string(KernelKind k) { return k == KernelKind::Rbf ? "rbf" : "linear"; }

KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "rbf") return KernelKind::Rbf;
  if (s == "linear") return KernelKind::Linear;
  throw Error(Errc::ConfigError, "unknown kernel '" + std::string(s) + "'");
}

double KernelSpec::operator()(std::span<const double> a, std::span<const double> b) const {
  double s = 0.0;
  if (kind == KernelKind::Linear) {
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::exp(-gamma * s);
}

std::vector<double> EngagementModel::standardize(std::span<const double> x) const {
  if (x.size() != feature_means.size())
    throw Error(Errc::DimensionMismatch, "feature vector has " + std::to_string(x.size()) +
                                             " values, model expects " +
                                             std::to_string(feature_means.size()));
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - feature_means[k]) / feature_stds[k];
  return z;
}

double EngagementModel::decision(std::span<const double> x) const {
  const auto z = standardize(x);
  double f = bias_term;
  for (std::size_t i = 0; i < support_vectors.size(); ++i)
    f += dual_coefs[i] * kernel(support_vectors[i], z);
  return f;
}

TrainResult train_svr(const Matrix& X, std::span<const double> y, const Hyperparams& hp,
                      const std::string& registry_hash, const TrainOptions& opts) {
  check_matrix(X, y.size());
  TrainResult res;
  auto& m = res.model;
  m = base_model(X, ModelKind::Svr, hp, registry_hash, opts);
  const std::size_t n = X.size();
  res.coefficients.assign(n, 0.0);
  if (n > 1 && std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
    std::cerr << "warning: all training targets are equal; returning a constant model\n";
    m.bias_term = y[0];
    res.report.converged = true;
    return res;
  }

  Matrix Z(n);
  for (std::size_t i = 0; i < n; ++i) Z[i] = m.standardize(X[i]);
  const auto K = kernel_matrix(m, Z);
  std::vector<int> sign(2 * n);
  std::vector<std::size_t> row(2 * n);
  std::vector<double> p(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    sign[i] = 1, sign[i + n] = -1;
    row[i] = row[i + n] = i;
    p[i] = m.epsilon - y[i];
    p[i + n] = m.epsilon + y[i];
  }
  const QMatrix Q(K, n, std::move(sign), std::move(row));
  Solver solver(Q, std::move(p), m.C);
  auto sol = solver.run(opts);
  for (std::size_t i = 0; i < n; ++i) res.coefficients[i] = sol.alpha[i] - sol.alpha[i + n];
  m.bias_term = -sol.rho;
  keep_support_vectors(m, Z, res.coefficients);
  res.report = {sol.iterations, sol.converged, sol.violation, std::move(sol.objective_history)};
  return res;
}

TrainResult train_svc(const Matrix& X, std::span<const int> labels, const Hyperparams& hp,
                      const std::string& registry_hash, const TrainOptions& opts) {
  check_matrix(X, labels.size());
  bool pos = false, neg = false;
  for (int l : labels) {
    if (l == 1) pos = true;
    else if (l == -1) neg = true;
    else throw Error(Errc::SchemaError, "class labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error(Errc::SingleClass, "training labels contain a single class");

  TrainResult res;
  auto& m = res.model;
  m = base_model(X, ModelKind::Svc, hp, registry_hash, opts);
  const std::size_t n = X.size();
  Matrix Z(n);
  for (std::size_t i = 0; i < n; ++i) Z[i] = m.standardize(X[i]);
  const auto K = kernel_matrix(m, Z);
  std::vector<int> sign(labels.begin(), labels.end());
  std::vector<std::size_t> row(n);
  std::iota(row.begin(), row.end(), 0);
  const QMatrix Q(K, n, std::move(sign), std::move(row));
  Solver solver(Q, std::vector<double>(n, -1.0), m.C);
  auto sol = solver.run(opts);
  res.coefficients.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.coefficients[i] = labels[i] * sol.alpha[i];
  m.bias_term = -sol.rho;
  keep_support_vectors(m, Z, res.coefficients);
  res.report = {sol.iterations, sol.converged, sol.violation, std::move(sol.objective_history)};
  return res;
}

double predict(const EngagementModel& m, const aesthetics::FeatureVector& x) {
  if (x.registry_hash != m.registry_hash)
    throw Error(Errc::RegistryMismatch, "feature registry " + x.registry_hash +
                                            " does not match model registry " + m.registry_hash);
  return m.decision(x.values);
}

int classify(const EngagementModel& m, std::span<const double> x) {
  return m.decision(x) >= 0.0 ? 1 : -1;
}

SuccessLabeling quartile_labels(const std::map<std::string, double>& scores) {
  if (scores.size() < 8)
    throw Error(Errc::TooFewScores, "quartile labelling needs at least 8 scores");
  std::vector<double> values;
  for (const auto& [id, s] : scores) values.push_back(s);
  SuccessLabeling out;
  out.lower_threshold = stats::percentile(values, 0.25);
  out.upper_threshold = stats::percentile(values, 0.75);
  for (const auto& [id, s] : scores) {
    if (s < out.lower_threshold) out.unsuccessful_ids.push_back(id);
    else if (s > out.upper_threshold) out.successful_ids.push_back(id);
  }
  if (out.successful_ids.empty() || out.unsuccessful_ids.empty())
    throw Error(Errc::DegenerateQuartiles,
                "tied scores leave a quartile class empty after excluding threshold ties");
  return out;
}

EvaluationReport evaluate_classifier(const EngagementModel& m, const Matrix& X,
                                     std::span<const int> labels) {
  if (X.empty()) throw Error(Errc::EmptyTestSet, "test set is empty");
  if (X.size() != labels.size())
    throw Error(Errc::DimensionMismatch, "test rows and labels differ in count");
  EvaluationReport r;
  r.kind = ModelKind::Svc;
  r.n = X.size();
  Confusion c;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const int p = classify(m, X[i]);
    if (labels[i] > 0) (p > 0 ? c.tp : c.fn)++;
    else (p > 0 ? c.fp : c.tn)++;
  }
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(r.n);
  r.confusion = c;
  return r;
}

EvaluationReport evaluate_regressor(const EngagementModel& m, const Matrix& X,
                                    std::span<const double> y) {
  if (X.empty()) throw Error(Errc::EmptyTestSet, "test set is empty");
  if (X.size() != y.size())
    throw Error(Errc::DimensionMismatch, "test rows and targets differ in count");
  EvaluationReport r;
  r.kind = ModelKind::Svr;
  r.n = X.size();
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double e = m.decision(X[i]) - y[i];
    se += e * e;
    ae += std::fabs(e);
  }
  r.rmse = std::sqrt(se / static_cast<double>(r.n));
  r.mae = ae / static_cast<double>(r.n);
  return r;
}

std::vector<FeatureWeight> linear_significance(const EngagementModel& m,
                                               std::span<const std::string> feature_ids,
                                               std::size_t top) {
  if (m.kernel.kind != KernelKind::Linear)
    throw Error(Errc::ConfigError, "significance weights need a linear-kernel model");
  if (feature_ids.size() != m.num_features())
    throw Error(Errc::DimensionMismatch, "feature id count does not match the model");
  std::vector<double> w(m.num_features(), 0.0);
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i)
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += m.dual_coefs[i] * m.support_vectors[i][k];
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::fabs(w[a]) > std::fabs(w[b]); });
  std::vector<FeatureWeight> out;
  for (std::size_t i = 0; i < std::min(top, order.size()); ++i)
    out.push_back({feature_ids[order[i]], w[order[i]]});
  return out;
}

json evaluation_to_json(const EvaluationReport& r) {
  json j{{"kind", kind_name(r.kind)}, {"n", r.n}};
  if (r.accuracy) j["accuracy"] = *r.accuracy;
  if (r.confusion)
    j["confusion"] = {{"tp", r.confusion->tp},
                      {"fp", r.confusion->fp},
                      {"tn", r.confusion->tn},
                      {"fn", r.confusion->fn}};
  if (r.rmse) j["rmse"] = *r.rmse;
  if (r.mae) j["mae"] = *r.mae;
  json sig = json::array();
  for (const auto& f : r.significance) sig.push_back({{"feature", f.feature}, {"weight", f.weight}});
  j["significance"] = sig;
  return j;
}

json model_to_json(const EngagementModel& m) {
  return {{"version", 1},
          {"kind", kind_name(m.kind)},
          {"kernel", {{"kind", to_string(m.kernel.kind)}, {"gamma", m.kernel.gamma}}},
          {"C", m.C},
          {"epsilon", m.epsilon},
          {"sv", m.support_vectors},
          {"alpha", m.dual_coefs},
          {"b", m.bias_term},
          {"standardize", {{"mean", m.feature_means}, {"std", m.feature_stds}}},
          {"registry_hash", m.registry_hash}};
}

EngagementModel model_from_json(const json& j) {
  EngagementModel m;
  try {
    if (j.at("version").get<int>() != 1)
      throw Error(Errc::SchemaError, "unsupported model version");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "svr") m.kind = ModelKind::Svr;
    else if (kind == "svc") m.kind = ModelKind::Svc;
    else throw Error(Errc::SchemaError, "unknown model kind '" + kind + "'");
    m.kernel.kind = parse_kernel_kind(j.at("kernel").at("kind").get<std::string>());
    m.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    m.C = j.at("C").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.support_vectors = j.at("sv").get<Matrix>();
    m.dual_coefs = j.at("alpha").get<std::vector<double>>();
    m.bias_term = j.at("b").get<double>();
    m.feature_means = j.at("standardize").at("mean").get<std::vector<double>>();
    m.feature_stds = j.at("standardize").at("std").get<std::vector<double>>();
    m.registry_hash = j.at("registry_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("bad model artifact: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw Error(Errc::SchemaError, e.what());
    throw;
  }
  if (m.support_vectors.size() != m.dual_coefs.size() ||
      m.feature_means.size() != m.feature_stds.size())
    throw Error(Errc::SchemaError, "model artifact arrays have inconsistent lengths");
  for (const auto& sv : m.support_vectors)
    if (sv.size() != m.feature_means.size())
      throw Error(Errc::SchemaError, "support vector length does not match the feature count");
  return m;
}

const GridPoint& best_grid_point(std::span<const GridPoint> points) {
  if (points.empty()) throw Error(Errc::ConfigError, "hyperparameter grid is empty");
  const GridPoint* best = &points.front();
  for (const auto& p : points)
    if (p.score < best->score) best = &p;
  return *best;
}

std::vector<GridPoint> grid_search_svr(const Matrix& X, std::span<const double> y,
                                       std::span<const Hyperparams> grid, int folds,
                                       std::uint64_t seed, const TrainOptions& opts) {
  check_matrix(X, y.size());
  if (folds < 2 || static_cast<std::size_t>(folds) > X.size())
    throw Error(Errc::ConfigError, "fold count must be in [2, rows]");
  std::mt19937_64 rng(seed);
  const auto order = shuffled(X.size(), rng);
  std::vector<int> fold_of(X.size());
  for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = static_cast<int>(i % folds);

  std::vector<GridPoint> out;
  for (const auto& hp : grid) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
      Matrix tx, vx;
      std::vector<double> ty, vy;
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (fold_of[i] == f) vx.push_back(X[i]), vy.push_back(y[i]);
        else tx.push_back(X[i]), ty.push_back(y[i]);
      }
      const auto fit = train_svr(tx, ty, hp, "", opts);
      total += *evaluate_regressor(fit.model, vx, vy).rmse;
    }
    out.push_back({hp, total / folds});
  }
  return out;
}

std::vector<GridPoint> grid_search_svc(const Matrix& X, std::span<const int> labels,
                                       std::span<const Hyperparams> grid, int folds,
                                       std::uint64_t seed, const TrainOptions& opts) {
  check_matrix(X, labels.size());
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  if (folds < 2 || pos.size() < static_cast<std::size_t>(folds) ||
      neg.size() < static_cast<std::size_t>(folds))
    throw Error(Errc::ConfigError, "each class needs at least one row per fold");
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(X.size());
  for (const auto* cls : {&pos, &neg}) {
    const auto order = shuffled(cls->size(), rng);
    for (std::size_t i = 0; i < order.size(); ++i)
      fold_of[(*cls)[order[i]]] = static_cast<int>(i % folds);
  }

  std::vector<GridPoint> out;
  for (const auto& hp : grid) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
      Matrix tx, vx;
      std::vector<int> ty, vy;
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (fold_of[i] == f) vx.push_back(X[i]), vy.push_back(labels[i]);
        else tx.push_back(X[i]), ty.push_back(labels[i]);
      }
      const auto fit = train_svc(tx, ty, hp, "", opts);
      total += 1.0 - *evaluate_classifier(fit.model, vx, vy).accuracy;
    }
    out.push_back({hp, total / folds});
  }
  return out;
}

}  // namespace adlens::model
