#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace adlens::aesthetics {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

Hsv rgb_to_hsv(const Rgb& c);
Rgb hsv_to_rgb(const Hsv& c);

// Rec. 601 luma.
inline double luminance(const Rgb& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

enum class ImageFormat { Png, Jpeg };

std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes);

// Row-major pixels. source_width/source_height keep the dimensions of the
// encoded image before any downscaling.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int source_width = 0;
  int source_height = 0;
  std::vector<Rgb> rgb;
  std::vector<Hsv> hsv;

  std::size_t pixels() const { return rgb.size(); }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
};

inline constexpr int kMaxSide = 512;

// Builds a buffer from RGB values in [0, 1] and caches HSV. Throws TooSmall
// for empty dimensions and DimensionMismatch when rgb has the wrong length.
ImageBuffer make_image(int width, int height, std::vector<Rgb> rgb);

// PNG or JPEG payload. Images whose long side exceeds max_side are reduced by
// area averaging so the long side equals max_side.
ImageBuffer decode_image(std::span<const std::uint8_t> bytes, int max_side = kMaxSide);
ImageBuffer load_image(const std::filesystem::path& path, int max_side = kMaxSide);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality = 95);

}  // namespace adlens::aesthetics
