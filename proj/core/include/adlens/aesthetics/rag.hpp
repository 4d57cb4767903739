#pragma once

#include <vector>

#include "adlens/aesthetics/segmentation.hpp"

namespace adlens::aesthetics {

// Symmetric dense weight matrix without self loops.
struct WeightedGraph {
  int n = 0;
  std::vector<double> w;

  explicit WeightedGraph(int nodes = 0)
      : n(nodes), w(static_cast<std::size_t>(nodes) * static_cast<std::size_t>(nodes), 0.0) {}
  double& operator()(int i, int j) { return w[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return w[static_cast<std::size_t>(i) * n + j]; }
  void connect(int i, int j, double weight) { (*this)(i, j) = (*this)(j, i) = weight; }
};

// cut(A,B)/assoc(A,V) + cut(A,B)/assoc(B,V). A term whose assoc is zero
// contributes zero. Both sides must be non-empty.
double ncut_value(const WeightedGraph& g, const std::vector<bool>& in_a);

struct Bipartition {
  std::vector<bool> in_a;
  double ncut = 0.0;
};

// Minimum Ncut over the n - 1 threshold cuts of the Fiedler vector of the
// normalized Laplacian. A single-node graph has no cut; it reports 2.0, the
// value of a two-node graph, so "no split" is never better than a real cut.
Bipartition best_sweep_cut(const WeightedGraph& g);

// Number of nested two-way cuts applied while the best Ncut stays at or below
// stop_threshold (depth of the deepest branch).
int recursive_cut_depth(const WeightedGraph& g, double stop_threshold, int max_depth);

struct RagOptions {
  double sigma_c = 0.25;
  double merge_threshold = 0.5;
  double ncut_stop = 0.5;
  int max_depth = 16;
};

struct RagEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

struct RegionAdjacencyGraph {
  std::vector<int> nodes;
  std::vector<Rgb> colors;
  std::vector<RagEdge> edges;  // a < b, sorted
  int merged_count = 0;        // segments left after threshold merging
  double best_ncut = 0.0;
  int cut_depth = 0;

  WeightedGraph graph() const;
};

// Edge weight exp(-|c_i - c_j|^2 / sigma_c^2) on mean RGB.
RegionAdjacencyGraph build_rag(const Segmentation& seg, const RagOptions& opts = {});

}  // namespace adlens::aesthetics
