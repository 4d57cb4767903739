#include "adlens/aesthetics/wavelet.hpp"

#include <algorithm>
#include <string>

#include "adlens/error.hpp"

namespace adlens::aesthetics {

double Channel::energy() const {
  double e = 0.0;
  for (double v : data) e += v * v;
  return e;
}

Channel pad_replicate(const Channel& c, int multiple) {
  const int w = (c.width + multiple - 1) / multiple * multiple;
  const int h = (c.height + multiple - 1) / multiple * multiple;
  if (w == c.width && h == c.height) return c;
  Channel out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = c(std::min(x, c.width - 1), std::min(y, c.height - 1));
  return out;
}

WaveletDecomposition wavelet_decompose(const Channel& c, int levels) {
  if (levels < 1) throw Error(Errc::TooSmall, "wavelet needs at least one level");
  const int block = 1 << levels;
  const int min_side = std::max(8, block);
  if (c.width < min_side || c.height < min_side)
    throw Error(Errc::TooSmall, "wavelet input must be at least " + std::to_string(min_side) +
                                    "x" + std::to_string(min_side));
  if (c.width % block != 0 || c.height % block != 0)
    throw Error(Errc::DimensionMismatch,
                "wavelet input sides must be divisible by " + std::to_string(block));

  WaveletDecomposition d;
  Channel ll = c;
  for (int l = 0; l < levels; ++l) {
    const int w = ll.width / 2;
    const int h = ll.height / 2;
    Channel a(w, h);
    WaveletLevel lvl{Channel(w, h), Channel(w, h), Channel(w, h)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double p = ll(2 * x, 2 * y);
        const double q = ll(2 * x + 1, 2 * y);
        const double r = ll(2 * x, 2 * y + 1);
        const double s = ll(2 * x + 1, 2 * y + 1);
        a(x, y) = 0.5 * (p + q + r + s);
        lvl.lh(x, y) = 0.5 * (p + q - r - s);
        lvl.hl(x, y) = 0.5 * (p - q + r - s);
        lvl.hh(x, y) = 0.5 * (p - q - r + s);
      }
    }
    d.levels.push_back(std::move(lvl));
    ll = std::move(a);
  }
  d.approximation = std::move(ll);
  return d;
}

Channel wavelet_reconstruct(const WaveletDecomposition& d) {
  Channel ll = d.approximation;
  for (auto it = d.levels.rbegin(); it != d.levels.rend(); ++it) {
    const int w = ll.width;
    const int h = ll.height;
    Channel up(2 * w, 2 * h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double a = ll(x, y);
        const double lh = it->lh(x, y);
        const double hl = it->hl(x, y);
        const double hh = it->hh(x, y);
        up(2 * x, 2 * y) = 0.5 * (a + lh + hl + hh);
        up(2 * x + 1, 2 * y) = 0.5 * (a + lh - hl - hh);
        up(2 * x, 2 * y + 1) = 0.5 * (a - lh + hl - hh);
        up(2 * x + 1, 2 * y + 1) = 0.5 * (a - lh - hl + hh);
      }
    }
    ll = std::move(up);
  }
  return ll;
}

}  // namespace adlens::aesthetics
