#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "adlens/aesthetics/features.hpp"
#include "adlens/biasdetect.hpp"
#include "adlens/debias.hpp"
#include "adlens/model.hpp"

namespace adlens::oracle {

struct OracleResult {
  double score = 0.0;
  std::vector<std::string> ids;  // sorted
  std::vector<double> percents;  // aligned with ids
};

inline double oracle_adjust(double v, double pct, double sd, const aesthetics::FeatureDescriptor& d) {
  double out = std::abs(v) < 1e-9 ? v + sd * pct / 100.0 : v * (1.0 + pct / 100.0);
  if (d.lower && out < *d.lower) out = *d.lower;
  if (d.upper && out > *d.upper) out = *d.upper;
  return out;
}

// Materializes every (subset of size <= k, non-zero grid assignment) and
// picks the maximum under the documented tie-break order.
inline OracleResult brute_force_tune(const model::EngagementModel& m,
                                     const aesthetics::FeatureRegistry& reg,
                                     const aesthetics::FeatureVector& x, int k,
                                     const std::vector<double>& grid) {
  std::vector<std::size_t> tunable;
  for (std::size_t i = 0; i < reg.size(); ++i)
    if (reg[i].tunable) tunable.push_back(i);
  std::vector<double> steps;
  for (double g : grid)
    if (g != 0.0) steps.push_back(g);

  std::vector<OracleResult> all;
  const std::size_t n = tunable.size();
  for (int size = 0; size <= k; ++size) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + size, true);
    do {
      std::vector<std::size_t> subset;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) subset.push_back(tunable[i]);
      std::vector<std::size_t> digit(subset.size(), 0);
      while (true) {
        auto v = x;
        OracleResult r;
        std::vector<std::pair<std::string, double>> ch;
        for (std::size_t s = 0; s < subset.size(); ++s) {
          const std::size_t f = subset[s];
          const double sd = f < m.feature_stds.size() ? m.feature_stds[f] : 1.0;
          v.values[f] = oracle_adjust(x.values[f], steps[digit[s]], sd, reg[f]);
          ch.emplace_back(reg[f].id, steps[digit[s]]);
        }
        std::sort(ch.begin(), ch.end());
        for (auto& [id, p] : ch) {
          r.ids.push_back(id);
          r.percents.push_back(p);
        }
        r.score = model::predict(m, v);
        all.push_back(std::move(r));
        std::size_t pos = 0;
        while (pos < digit.size() && ++digit[pos] == steps.size()) digit[pos++] = 0;
        if (pos == digit.size()) break;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  auto key = [](const OracleResult& r) {
    double l1 = 0.0;
    for (double p : r.percents) l1 += std::abs(p);
    return std::make_tuple(-r.score, r.ids.size(), l1, r.ids, r.percents);
  };
  return *std::min_element(all.begin(), all.end(),
                           [&](const auto& a, const auto& b) { return key(a) < key(b); });
}

// Largest violation of the SVR optimality conditions, stated directly on the
// residual r = y - f(x) and the signed dual coefficient of each training row.
inline double svr_kkt_violation(const model::TrainResult& fit, const model::Matrix& X, std::span<const double> y) {
  const auto& m = fit.model;
  double worst = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double r = y[i] - m.decision(X[i]);
    const double b = fit.coefficients[i];
    double v;
    if (b == 0.0) v = std::fabs(r) - m.epsilon;
    else if (b == m.C) v = m.epsilon - r;
    else if (b == -m.C) v = r + m.epsilon;
    else if (b > 0.0) v = std::fabs(r - m.epsilon);
    else v = std::fabs(r + m.epsilon);
    worst = std::max(worst, v);
  }
  return worst;
}

inline double svc_kkt_violation(const model::TrainResult& fit, const model::Matrix& X, std::span<const int> labels) {
  const auto& m = fit.model;
  double worst = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double margin = labels[i] * m.decision(X[i]);
    const double a = std::fabs(fit.coefficients[i]);
    double v;
    if (a == 0.0) v = 1.0 - margin;
    else if (a == m.C) v = margin - 1.0;
    else v = std::fabs(margin - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

// Textbook LOF written directly from the definitions, kept separate from the
// library path: full sort per point, tie-inclusive k-neighborhoods.
inline std::vector<double> brute_force_lof(const std::vector<bias::Point>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  auto d = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t i = 0; i < pts[a].size(); ++i) s += std::pow(pts[a][i] - pts[b][i], 2);
    return std::sqrt(s);
  };
  std::vector<double> kdist(n);
  std::vector<std::vector<std::size_t>> nbr(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t o = 0; o < n; ++o)
      if (o != p) all.push_back({d(p, o), o});
    std::sort(all.begin(), all.end());
    kdist[p] = all[k - 1].first;
    for (auto& [dist, o] : all)
      if (dist <= kdist[p]) nbr[p].push_back(o);
  }
  std::vector<double> lrd(n);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0;
    for (auto o : nbr[p]) s += std::max(kdist[o], d(p, o));
    lrd[p] = 1.0 / std::max(s / nbr[p].size(), 1e-12);
  }
  std::vector<double> lof(n);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0;
    for (auto o : nbr[p]) s += lrd[o] / lrd[p];
    lof[p] = s / nbr[p].size();
  }
  return lof;
}

// Central finite differences of J, independent of the analytic chain rule.
inline std::vector<double> fd_gradient(std::vector<double> W, const debias::DesignMatrix& X,
                                const debias::ScoreDistribution& p, double h = 1e-5) {
  std::vector<double> g(W.size());
  for (std::size_t q = 0; q < W.size(); ++q) {
    const double w = W[q];
    W[q] = w + h;
    const double up = debias::kl_objective(W, X, p);
    W[q] = w - h;
    const double dn = debias::kl_objective(W, X, p);
    W[q] = w;
    g[q] = (up - dn) / (2 * h);
  }
  return g;
}

}  // namespace adlens::oracle
