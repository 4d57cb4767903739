#pragma once

#include <vector>

namespace adlens::aesthetics {

struct Channel {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // row-major

  Channel() = default;
  Channel(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double energy() const;
};

// Pads right and bottom by edge replication up to the next multiple.
Channel pad_replicate(const Channel& c, int multiple);

struct WaveletLevel {
  Channel lh;  // low-pass along x, high-pass along y
  Channel hl;  // high-pass along x, low-pass along y
  Channel hh;

  double detail_energy() const { return lh.energy() + hl.energy() + hh.energy(); }
};

// levels[0] is the finest scale; approximation is the coarsest LL band.
struct WaveletDecomposition {
  Channel approximation;
  std::vector<WaveletLevel> levels;
};

// Orthonormal 2-D Haar transform. Throws TooSmall when a side is shorter than
// max(8, 2^levels) and DimensionMismatch when a side is not divisible by
// 2^levels.
WaveletDecomposition wavelet_decompose(const Channel& c, int levels = 3);
Channel wavelet_reconstruct(const WaveletDecomposition& d);

}  // namespace adlens::aesthetics
