#pragma once

#include <cstdint>
#include <vector>

#include "adlens/aesthetics/image.hpp"

namespace adlens::aesthetics {

struct Segment {
  int id = 0;
  std::size_t area = 0;
  double mean_hue = 0.0;  // circular mean, degrees
  double mean_saturation = 0.0;
  double mean_value = 0.0;
  Rgb mean_rgb;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

// labels[i] indexes segments; segments are sorted by descending area (ties by
// first pixel in raster order) and segments[s].id == s.
struct Segmentation {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<Segment> segments;
};

struct SegmentOptions {
  int k = 6;
  double min_area_frac = 0.01;
  std::uint64_t seed = 42;
  int max_iters = 30;
};

// k-means++ on CIE LUV, 4-connected components of the cluster labels, then
// components smaller than min_area_frac of the image are merged into the
// adjacent component with the nearest mean colour. Throws BadK for k < 2.
Segmentation segment_image(const ImageBuffer& img, const SegmentOptions& opts = {});

// Fraction of the convex hull (of the pixel squares) covered by segment s.
double segment_convexity(const Segmentation& seg, int s);

}  // namespace adlens::aesthetics
