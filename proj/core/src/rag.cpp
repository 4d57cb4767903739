#include "adlens/aesthetics/rag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include <Eigen/Dense>

namespace adlens::aesthetics {
namespace {

WeightedGraph induced(const WeightedGraph& g, const std::vector<int>& keep) {
  const int m = static_cast<int>(keep.size());
  WeightedGraph sub(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) sub(i, j) = g(keep[i], keep[j]);
  return sub;
}

int cut_depth(const WeightedGraph& g, double stop, int remaining) {
  if (g.n < 2 || remaining <= 0) return 0;
  const auto cut = best_sweep_cut(g);
  if (cut.ncut > stop) return 0;
  std::vector<int> a, b;
  for (int i = 0; i < g.n; ++i) (cut.in_a[i] ? a : b).push_back(i);
  return 1 + std::max(cut_depth(induced(g, a), stop, remaining - 1),
                      cut_depth(induced(g, b), stop, remaining - 1));
}

}  // namespace

double ncut_value(const WeightedGraph& g, const std::vector<bool>& in_a) {
  double cut = 0.0, assoc_a = 0.0, assoc_b = 0.0;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      const double w = g(i, j);
      (in_a[i] ? assoc_a : assoc_b) += w;
      if (in_a[i] && !in_a[j]) cut += w;
    }
  }
  const double ta = assoc_a > 0.0 ? cut / assoc_a : 0.0;
  const double tb = assoc_b > 0.0 ? cut / assoc_b : 0.0;
  return ta + tb;
}

Bipartition best_sweep_cut(const WeightedGraph& g) {
  Bipartition best;
  if (g.n < 2) {
    best.in_a.assign(static_cast<std::size_t>(g.n), true);
    best.ncut = 2.0;
    return best;
  }
  const int n = g.n;
  Eigen::VectorXd dinv(n);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < n; ++j) d += g(i, j);
    dinv(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Eigen::MatrixXd lap(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) lap(i, j) = (i == j ? 1.0 : 0.0) - dinv(i) * g(i, j) * dinv(j);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  const Eigen::VectorXd fiedler = es.eigenvectors().col(1);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return fiedler(a) * dinv(a) < fiedler(b) * dinv(b);
  });

  std::vector<bool> in_a(n, false);
  best.ncut = std::numeric_limits<double>::infinity();
  for (int split = 1; split < n; ++split) {
    in_a[order[split - 1]] = true;
    const double v = ncut_value(g, in_a);
    if (v < best.ncut) {
      best.ncut = v;
      best.in_a = in_a;
    }
  }
  return best;
}

int recursive_cut_depth(const WeightedGraph& g, double stop_threshold, int max_depth) {
  return cut_depth(g, stop_threshold, max_depth);
}

WeightedGraph RegionAdjacencyGraph::graph() const {
  WeightedGraph g(static_cast<int>(nodes.size()));
  for (const auto& e : edges) g.connect(e.a, e.b, e.weight);
  return g;
}

RegionAdjacencyGraph build_rag(const Segmentation& seg, const RagOptions& opts) {
  RegionAdjacencyGraph rag;
  const int m = static_cast<int>(seg.segments.size());
  for (const auto& s : seg.segments) {
    rag.nodes.push_back(s.id);
    rag.colors.push_back(s.mean_rgb);
  }

  std::set<std::pair<int, int>> touching;
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * seg.width + x;
      const int a = seg.labels[p];
      auto note = [&](int b) {
        if (a != b) touching.emplace(std::min(a, b), std::max(a, b));
      };
      if (x + 1 < seg.width) note(seg.labels[p + 1]);
      if (y + 1 < seg.height) note(seg.labels[p + seg.width]);
    }
  }
  const double s2 = opts.sigma_c * opts.sigma_c;
  for (const auto& [a, b] : touching) {
    const auto& ca = rag.colors[a];
    const auto& cb = rag.colors[b];
    const double d2 = (ca.r - cb.r) * (ca.r - cb.r) + (ca.g - cb.g) * (ca.g - cb.g) +
                      (ca.b - cb.b) * (ca.b - cb.b);
    rag.edges.push_back({a, b, std::exp(-d2 / s2)});
  }

  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int c) {
    while (parent[c] != c) c = parent[c] = parent[parent[c]];
    return c;
  };
  int groups = m;
  for (const auto& e : rag.edges) {
    if (e.weight <= opts.merge_threshold) continue;
    const int ra = find(e.a), rb = find(e.b);
    if (ra != rb) {
      parent[std::max(ra, rb)] = std::min(ra, rb);
      --groups;
    }
  }
  rag.merged_count = groups;

  const auto g = rag.graph();
  rag.best_ncut = best_sweep_cut(g).ncut;
  rag.cut_depth = recursive_cut_depth(g, opts.ncut_stop, opts.max_depth);
  return rag;
}

}  // namespace adlens::aesthetics
