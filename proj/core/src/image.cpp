#include "adlens/aesthetics/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "adlens/error.hpp"

namespace adlens::aesthetics {
namespace {

std::span<const std::uint8_t> trim_trailing_zeros(std::span<const std::uint8_t> bytes) {
  std::size_t n = bytes.size();
  while (n > 0 && bytes[n - 1] == 0) --n;
  return bytes.first(n);
}

bool jpeg_complete(std::span<const std::uint8_t> bytes) {
  const auto b = trim_trailing_zeros(bytes);
  return b.size() >= 4 && b[b.size() - 2] == 0xFF && b[b.size() - 1] == 0xD9;
}

bool png_complete(std::span<const std::uint8_t> bytes) {
  const auto b = trim_trailing_zeros(bytes);
  // IEND chunk: length (4) + "IEND" + CRC (4) closes the stream.
  if (b.size() < 8 + 12) return false;
  const auto tail = b.last(8);
  return tail[0] == 'I' && tail[1] == 'E' && tail[2] == 'N' && tail[3] == 'D';
}

cv::Mat to_bgr8(const ImageBuffer& img) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      const auto& c = img.rgb[img.index(x, y)];
      auto q = [](double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      };
      row[x] = cv::Vec3b(q(c.b), q(c.g), q(c.r));
    }
  }
  return m;
}

std::vector<std::uint8_t> encode(const ImageBuffer& img, const char* ext,
                                 const std::vector<int>& params) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, to_bgr8(img), out, params))
    throw Error(Errc::IoError, std::string("failed to encode ") + ext);
  return out;
}

}  // namespace

Hsv rgb_to_hsv(const Rgb& c) {
  const double mx = std::max({c.r, c.g, c.b});
  const double mn = std::min({c.r, c.g, c.b});
  const double d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? d / mx : 0.0;
  if (d > 0.0) {
    double h;
    if (mx == c.r)
      h = 60.0 * std::fmod((c.g - c.b) / d, 6.0);
    else if (mx == c.g)
      h = 60.0 * ((c.b - c.r) / d + 2.0);
    else
      h = 60.0 * ((c.r - c.g) / d + 4.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
  }
  return out;
}

Rgb hsv_to_rgb(const Hsv& c) {
  const double chroma = c.v * c.s;
  const double hp = c.h / 60.0;
  const double x = chroma * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  const double m = c.v - chroma;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = chroma, g = x; break;
    case 1: r = x, g = chroma; break;
    case 2: g = chroma, b = x; break;
    case 3: g = x, b = chroma; break;
    case 4: r = x, b = chroma; break;
    default: r = chroma, b = x; break;
  }
  return {r + m, g + m, b + m};
}

std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin()))
    return ImageFormat::Png;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return ImageFormat::Jpeg;
  return std::nullopt;
}

ImageBuffer make_image(int width, int height, std::vector<Rgb> rgb) {
  if (width <= 0 || height <= 0) throw Error(Errc::TooSmall, "image has an empty dimension");
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw Error(Errc::DimensionMismatch, "pixel count does not match width * height");
  ImageBuffer img;
  img.width = img.source_width = width;
  img.height = img.source_height = height;
  img.rgb = std::move(rgb);
  img.hsv.resize(img.rgb.size());
  std::transform(img.rgb.begin(), img.rgb.end(), img.hsv.begin(), rgb_to_hsv);
  return img;
}

ImageBuffer decode_image(std::span<const std::uint8_t> bytes, int max_side) {
  const auto format = sniff_format(bytes);
  if (!format) throw Error(Errc::UnsupportedFormat, "payload is neither PNG nor JPEG");
  if (*format == ImageFormat::Jpeg && !jpeg_complete(bytes))
    throw Error(Errc::DecodeError, "JPEG stream is truncated (no end-of-image marker)");
  if (*format == ImageFormat::Png && !png_complete(bytes))
    throw Error(Errc::DecodeError, "PNG stream is truncated (no IEND chunk)");

  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(Errc::DecodeError, e.what());
  }
  if (bgr.empty()) throw Error(Errc::DecodeError, "image payload could not be decoded");

  const int src_w = bgr.cols;
  const int src_h = bgr.rows;
  cv::Mat rgbf;
  cv::cvtColor(bgr, rgbf, cv::COLOR_BGR2RGB);
  rgbf.convertTo(rgbf, CV_64FC3, 1.0 / 255.0);
  const int long_side = std::max(src_w, src_h);
  if (max_side > 0 && long_side > max_side) {
    const double f = static_cast<double>(max_side) / long_side;
    const int w = std::max(1, static_cast<int>(std::lround(src_w * f)));
    const int h = std::max(1, static_cast<int>(std::lround(src_h * f)));
    cv::Mat small;
    cv::resize(rgbf, small, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    rgbf = small;
  }

  std::vector<Rgb> px(static_cast<std::size_t>(rgbf.rows) * static_cast<std::size_t>(rgbf.cols));
  for (int y = 0; y < rgbf.rows; ++y) {
    const auto* row = rgbf.ptr<cv::Vec3d>(y);
    for (int x = 0; x < rgbf.cols; ++x) {
      auto& p = px[static_cast<std::size_t>(y) * rgbf.cols + x];
      p = {std::clamp(row[x][0], 0.0, 1.0), std::clamp(row[x][1], 0.0, 1.0),
           std::clamp(row[x][2], 0.0, 1.0)};
    }
  }
  auto img = make_image(rgbf.cols, rgbf.rows, std::move(px));
  img.source_width = src_w;
  img.source_height = src_h;
  return img;
}

ImageBuffer load_image(const std::filesystem::path& path, int max_side) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open image " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_image(bytes, max_side);
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) { return encode(img, ".png", {}); }

std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality) {
  return encode(img, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

}  // namespace adlens::aesthetics
