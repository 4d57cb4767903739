#include "adlens/aesthetics/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <set>

#include <opencv2/imgproc.hpp>

#include "adlens/error.hpp"
#include "pixel_stats.hpp"

namespace adlens::aesthetics {
namespace {

using Luv = std::array<double, 3>;

std::vector<Luv> to_luv(const ImageBuffer& img) {
  cv::Mat rgb(img.height, img.width, CV_32FC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = rgb.ptr<cv::Vec3f>(y);
    for (int x = 0; x < img.width; ++x) {
      const auto& c = img.rgb[img.index(x, y)];
      row[x] = cv::Vec3f(static_cast<float>(c.r), static_cast<float>(c.g), static_cast<float>(c.b));
    }
  }
  cv::Mat luv;
  cv::cvtColor(rgb, luv, cv::COLOR_RGB2Luv);
  std::vector<Luv> out(img.pixels());
  for (int y = 0; y < img.height; ++y) {
    const auto* row = luv.ptr<cv::Vec3f>(y);
    for (int x = 0; x < img.width; ++x) out[img.index(x, y)] = {row[x][0], row[x][1], row[x][2]};
  }
  return out;
}

double dist2(const Luv& a, const Luv& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// k-means++ seeding. Seeding stops early when every remaining point already
// coincides with a centre, so a flat image yields a single cluster.
std::vector<Luv> seed_centres(const std::vector<Luv>& pts, int k, std::mt19937_64& rng) {
  std::vector<Luv> centres{pts[rng() % pts.size()]};
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = dist2(pts[i], centres[0]);
  while (static_cast<int>(centres.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) break;
    const double target = unit(rng) * total;
    double acc = 0.0;
    std::size_t pick = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] == 0.0) --pick;
    centres.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], dist2(pts[i], centres.back()));
  }
  return centres;
}

std::vector<int> kmeans(const std::vector<Luv>& pts, int k, std::uint64_t seed, int max_iters) {
  std::mt19937_64 rng(seed);
  auto centres = seed_centres(pts, k, rng);
  const int kk = static_cast<int>(centres.size());
  std::vector<int> labels(pts.size(), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double bd = dist2(pts[i], centres[0]);
      for (int c = 1; c < kk; ++c) {
        const double d = dist2(pts[i], centres[c]);
        if (d < bd) bd = d, best = c;
      }
      if (labels[i] != best) labels[i] = best, changed = true;
    }
    if (!changed) break;
    std::vector<Luv> sum(kk, Luv{0, 0, 0});
    std::vector<std::size_t> cnt(kk, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int a = 0; a < 3; ++a) sum[labels[i]][a] += pts[i][a];
      ++cnt[labels[i]];
    }
    // Empty clusters keep their centre and simply stay empty.
    for (int c = 0; c < kk; ++c)
      if (cnt[c] > 0)
        for (int a = 0; a < 3; ++a) centres[c][a] = sum[c][a] / static_cast<double>(cnt[c]);
  }
  return labels;
}

struct Components {
  std::vector<int> of_pixel;
  int count = 0;
};

Components connected_components(const std::vector<int>& cluster, int w, int h) {
  Components out;
  out.of_pixel.assign(cluster.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < cluster.size(); ++start) {
    if (out.of_pixel[start] >= 0) continue;
    const int id = out.count++;
    out.of_pixel[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % w);
      const int y = static_cast<int>(p / w);
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (out.of_pixel[q] < 0 && cluster[q] == cluster[p]) {
          out.of_pixel[q] = id;
          stack.push_back(q);
        }
      };
      visit(x + 1, y);
      visit(x - 1, y);
      visit(x, y + 1);
      visit(x, y - 1);
    }
  }
  return out;
}

}  // namespace

Segmentation segment_image(const ImageBuffer& img, const SegmentOptions& opts) {
  if (opts.k < 2) throw Error(Errc::BadK, "segmentation needs k >= 2");
  const int w = img.width;
  const int h = img.height;
  const auto luv = to_luv(img);
  const auto cluster = kmeans(luv, opts.k, opts.seed, opts.max_iters);
  auto comps = connected_components(cluster, w, h);

  const int n = comps.count;
  std::vector<std::size_t> area(n, 0);
  std::vector<Luv> colour_sum(n, Luv{0, 0, 0});
  std::vector<std::set<int>> adj(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = img.index(x, y);
      const int c = comps.of_pixel[p];
      ++area[c];
      for (int a = 0; a < 3; ++a) colour_sum[c][a] += luv[p][a];
      if (x + 1 < w && comps.of_pixel[p + 1] != c) {
        adj[c].insert(comps.of_pixel[p + 1]);
        adj[comps.of_pixel[p + 1]].insert(c);
      }
      if (y + 1 < h && comps.of_pixel[p + w] != c) {
        adj[c].insert(comps.of_pixel[p + w]);
        adj[comps.of_pixel[p + w]].insert(c);
      }
    }
  }

  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto mean_colour = [&](int c) {
    const double a = static_cast<double>(area[c]);
    return Luv{colour_sum[c][0] / a, colour_sum[c][1] / a, colour_sum[c][2] / a};
  };

  const double min_area = opts.min_area_frac * static_cast<double>(img.pixels());
  using Entry = std::pair<std::size_t, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (int i = 0; i < n; ++i) heap.emplace(area[i], i);
  while (!heap.empty()) {
    const auto [a, c] = heap.top();
    heap.pop();
    if (parent[c] != c || area[c] != a) continue;
    if (static_cast<double>(a) >= min_area) break;
    if (adj[c].empty()) continue;
    const Luv mc = mean_colour(c);
    int target = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int nb : adj[c]) {
      const double d = dist2(mc, mean_colour(nb));
      if (target < 0 || d < best || (d == best && area[nb] > area[target])) {
        best = d;
        target = nb;
      }
    }
    parent[c] = target;
    area[target] += area[c];
    for (int a2 = 0; a2 < 3; ++a2) colour_sum[target][a2] += colour_sum[c][a2];
    for (int nb : adj[c]) {
      adj[nb].erase(c);
      if (nb != target) {
        adj[nb].insert(target);
        adj[target].insert(nb);
      }
    }
    adj[target].erase(c);
    adj[c].clear();
    heap.emplace(area[target], target);
  }

  auto find = [&](int c) {
    while (parent[c] != c) {
      parent[c] = parent[parent[c]];
      c = parent[c];
    }
    return c;
  };

  // Order roots by descending area, ties by first raster pixel.
  std::vector<int> root_of_pixel(img.pixels());
  std::vector<std::size_t> first_pixel(n, img.pixels());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const int r = find(comps.of_pixel[p]);
    root_of_pixel[p] = r;
    first_pixel[r] = std::min(first_pixel[r], p);
  }
  std::vector<int> roots;
  for (int i = 0; i < n; ++i)
    if (parent[i] == i) roots.push_back(i);
  std::sort(roots.begin(), roots.end(), [&](int a, int b) {
    if (area[a] != area[b]) return area[a] > area[b];
    return first_pixel[a] < first_pixel[b];
  });
  std::vector<int> rank(n, -1);
  for (std::size_t i = 0; i < roots.size(); ++i) rank[roots[i]] = static_cast<int>(i);

  Segmentation seg;
  seg.width = w;
  seg.height = h;
  seg.labels.resize(img.pixels());
  const std::size_t m = roots.size();
  std::vector<detail::CircularMean> hue(m);
  std::vector<detail::AnchoredMean> sat(m), val(m), r(m), g(m), b(m), cx(m), cy(m);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = img.index(x, y);
      const int s = rank[root_of_pixel[p]];
      seg.labels[p] = s;
      hue[s].add(img.hsv[p].h);
      sat[s].add(img.hsv[p].s);
      val[s].add(img.hsv[p].v);
      r[s].add(img.rgb[p].r);
      g[s].add(img.rgb[p].g);
      b[s].add(img.rgb[p].b);
      cx[s].add(x);
      cy[s].add(y);
    }
  }
  seg.segments.resize(m);
  for (std::size_t s = 0; s < m; ++s) {
    auto& out = seg.segments[s];
    out.id = static_cast<int>(s);
    out.area = sat[s].count();
    out.mean_hue = hue[s].value();
    out.mean_saturation = sat[s].value();
    out.mean_value = val[s].value();
    out.mean_rgb = {r[s].value(), g[s].value(), b[s].value()};
    out.centroid_x = cx[s].value();
    out.centroid_y = cy[s].value();
  }
  return seg;
}

double segment_convexity(const Segmentation& seg, int s) {
  std::vector<cv::Point> corners;
  std::size_t area = 0;
  for (int y = 0; y < seg.height; ++y) {
    int lo = -1, hi = -1;
    for (int x = 0; x < seg.width; ++x) {
      if (seg.labels[static_cast<std::size_t>(y) * seg.width + x] != s) continue;
      ++area;
      if (lo < 0) lo = x;
      hi = x;
    }
    if (lo < 0) continue;
    corners.insert(corners.end(), {{lo, y}, {lo, y + 1}, {hi + 1, y}, {hi + 1, y + 1}});
  }
  if (area == 0) return 0.0;
  std::vector<cv::Point> hull;
  cv::convexHull(corners, hull);
  const double hull_area = cv::contourArea(hull);
  return hull_area > 0.0 ? std::min(1.0, static_cast<double>(area) / hull_area) : 0.0;
}

}  // namespace adlens::aesthetics
