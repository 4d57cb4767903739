#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

namespace adlens::aesthetics::detail {

// Running mean anchored at the first sample: a constant input returns that
// constant exactly, whatever the sample count.
class AnchoredMean {
 public:
  void add(double x) {
    if (n_ == 0) anchor_ = x;
    sum_ += x - anchor_;
    ++n_;
  }
  double value() const { return n_ == 0 ? 0.0 : anchor_ + sum_ / static_cast<double>(n_); }
  std::size_t count() const { return n_; }

 private:
  double anchor_ = 0.0;
  double sum_ = 0.0;
  std::size_t n_ = 0;
};

// Circular mean of angles in degrees, anchored the same way. Returns a value
// in [0, 360); an undefined mean (resultant ~ 0) returns 0.
class CircularMean {
 public:
  void add(double deg) {
    if (n_ == 0) anchor_ = deg;
    const double r = (deg - anchor_) * std::numbers::pi / 180.0;
    s_ += std::sin(r);
    c_ += std::cos(r);
    ++n_;
  }
  double value() const {
    if (n_ == 0 || std::hypot(s_, c_) < 1e-9 * static_cast<double>(n_)) return 0.0;
    double h = anchor_ + std::atan2(s_, c_) * 180.0 / std::numbers::pi;
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    return h;
  }

 private:
  double anchor_ = 0.0;
  double s_ = 0.0;
  double c_ = 0.0;
  std::size_t n_ = 0;
};

}  // namespace adlens::aesthetics::detail
