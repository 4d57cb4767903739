#include "adlens/aesthetics/features.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <opencv2/core.hpp>

#include "adlens/aesthetics/wavelet.hpp"
#include "adlens/error.hpp"
#include "adlens/stats.hpp"
#include "csv.hpp"
#include "pixel_stats.hpp"

namespace adlens::aesthetics {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<FeatureFamily, const char*>, 8> kFamilyNames{{
    {FeatureFamily::ColorExposure, "ColorExposure"},
    {FeatureFamily::RuleOfThirds, "RuleOfThirds"},
    {FeatureFamily::WaveletTexture, "WaveletTexture"},
    {FeatureFamily::SizeAspect, "SizeAspect"},
    {FeatureFamily::Region, "Region"},
    {FeatureFamily::DepthOfField, "DepthOfField"},
    {FeatureFamily::KeComposition, "KeComposition"},
    {FeatureFamily::RAG, "RAG"},
}};

FeatureDescriptor unit_feature(std::string id, FeatureFamily f, std::string name) {
  return {std::move(id), f, std::move(name), true, 0.0, 1.0};
}

FeatureDescriptor hue_feature(std::string id, FeatureFamily f, std::string name) {
  return {std::move(id), f, std::move(name), true, 0.0, 360.0};
}

FeatureDescriptor fixed_feature(std::string id, FeatureFamily f, std::string name) {
  return {std::move(id), f, std::move(name), false, std::nullopt, std::nullopt};
}

std::vector<FeatureDescriptor> standard_catalog() {
  using F = FeatureFamily;
  std::vector<FeatureDescriptor> c;
  c.push_back(unit_feature("exposure_mean_value", F::ColorExposure, "Light exposure"));
  c.push_back(unit_feature("saturation_mean", F::ColorExposure, "Average saturation"));
  c.push_back(hue_feature("hue_circular_mean", F::ColorExposure, "Average hue"));
  c.push_back({"colorfulness", F::ColorExposure, "Colorfulness", true, 0.0, std::nullopt});
  c.push_back(unit_feature("log_avg_luminance", F::ColorExposure, "Log-average luminance"));

  c.push_back(hue_feature("thirds_hue", F::RuleOfThirds, "Rule of thirds: hue"));
  c.push_back(unit_feature("thirds_saturation", F::RuleOfThirds, "Rule of thirds: saturation"));
  c.push_back(unit_feature("thirds_value", F::RuleOfThirds, "Rule of thirds: intensity"));

  const std::array<std::pair<const char*, const char*>, 3> channels{
      {{"h", "hue"}, {"s", "saturation"}, {"v", "intensity"}}};
  for (const auto& [ch, name] : channels) {
    for (int l = 1; l <= 3; ++l)
      c.push_back(unit_feature("wavelet_" + std::string(ch) + "_l" + std::to_string(l),
                               F::WaveletTexture,
                               "Spatial smoothness of level " + std::to_string(l) + " " + name));
  }
  for (const auto& [ch, name] : channels)
    c.push_back(unit_feature("wavelet_" + std::string(ch) + "_sum", F::WaveletTexture,
                             std::string("Spatial smoothness of ") + name + " (all levels)"));

  c.push_back({"size_sum", F::SizeAspect, "Image size (width + height)", true, 2.0, std::nullopt});
  c.push_back({"aspect_ratio", F::SizeAspect, "Aspect ratio", true, 1e-3, std::nullopt});

  c.push_back(fixed_feature("region_count", F::Region, "Number of large segments"));
  for (int i = 1; i <= 5; ++i)
    c.push_back(unit_feature("region_size_" + std::to_string(i), F::Region,
                             "Relative size of segment " + std::to_string(i)));
  c.push_back(unit_feature("largest_segment_value", F::Region, "Largest segment avg. intensity"));
  c.push_back(hue_feature("largest_segment_hue", F::Region, "Largest segment avg. hue"));
  c.push_back(unit_feature("largest_segment_saturation", F::Region,
                           "Largest segment avg. saturation"));
  c.push_back(unit_feature("largest_segment_convexity", F::Region, "Largest segment convexity"));

  c.push_back(unit_feature("dof_hue", F::DepthOfField, "Low DoF hue component"));
  c.push_back(unit_feature("dof_saturation", F::DepthOfField, "Low DoF saturation"));
  c.push_back(unit_feature("dof_value", F::DepthOfField, "Low DoF intensity"));

  c.push_back(unit_feature("edge_bbox_area", F::KeComposition, "Edge bounding-box area"));
  c.push_back(fixed_feature("hue_count", F::KeComposition, "Hue count"));
  c.push_back(unit_feature("blur_sharpness", F::KeComposition, "Sharpness"));
  c.push_back(unit_feature("contrast_width", F::KeComposition, "Contrast"));
  c.push_back(unit_feature("brightness", F::KeComposition, "Brightness"));

  c.push_back(fixed_feature("rag_segment_count", F::RAG, "RAG segment count"));
  c.push_back(fixed_feature("rag_best_ncut", F::RAG, "Best normalized cut"));
  c.push_back(fixed_feature("rag_cut_depth", F::RAG, "Recursive cut depth"));
  return c;
}

json params_to_json(const ExtractionParams& p) {
  return {{"segments_k", p.segments.k},
          {"segments_min_area_frac", p.segments.min_area_frac},
          {"segments_seed", p.segments.seed},
          {"segments_max_iters", p.segments.max_iters},
          {"rag_sigma_c", p.rag.sigma_c},
          {"rag_merge_threshold", p.rag.merge_threshold},
          {"rag_ncut_stop", p.rag.ncut_stop},
          {"rag_max_depth", p.rag.max_depth},
          {"wavelet_levels", p.wavelet_levels},
          {"blur_cutoff", p.blur_cutoff},
          {"edge_energy", p.edge_energy},
          {"region_min_frac", p.region_min_frac},
          {"max_side", p.max_side}};
}

ExtractionParams params_from_json(const json& j) {
  ExtractionParams p;
  p.segments.k = j.at("segments_k").get<int>();
  p.segments.min_area_frac = j.at("segments_min_area_frac").get<double>();
  p.segments.seed = j.at("segments_seed").get<std::uint64_t>();
  p.segments.max_iters = j.at("segments_max_iters").get<int>();
  p.rag.sigma_c = j.at("rag_sigma_c").get<double>();
  p.rag.merge_threshold = j.at("rag_merge_threshold").get<double>();
  p.rag.ncut_stop = j.at("rag_ncut_stop").get<double>();
  p.rag.max_depth = j.at("rag_max_depth").get<int>();
  p.wavelet_levels = j.at("wavelet_levels").get<int>();
  p.blur_cutoff = j.at("blur_cutoff").get<double>();
  p.edge_energy = j.at("edge_energy").get<double>();
  p.region_min_frac = j.at("region_min_frac").get<double>();
  p.max_side = j.at("max_side").get<int>();
  return p;
}

json descriptor_to_json(const FeatureDescriptor& d) {
  json j{{"id", d.id},
         {"family", to_string(d.family)},
         {"human_name", d.human_name},
         {"tunable", d.tunable}};
  if (d.lower) j["lower"] = *d.lower;
  if (d.upper) j["upper"] = *d.upper;
  return j;
}

json canonical(const std::vector<FeatureDescriptor>& features, const ExtractionParams& params) {
  json list = json::array();
  for (const auto& d : features) list.push_back(descriptor_to_json(d));
  return {{"features", list}, {"params", params_to_json(params)}};
}

// ---- feature computations -------------------------------------------------

Channel channel_of(const ImageBuffer& img, int which) {
  Channel c(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const auto& p = img.hsv[i];
    c.data[i] = which == 0 ? p.h / 360.0 : which == 1 ? p.s : p.v;
  }
  return c;
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// Index range [n * lo_num / den, n * hi_num / den), never empty.
std::pair<int, int> middle(int n, int lo_num, int hi_num, int den) {
  const int lo = n * lo_num / den;
  const int hi = std::max(lo + 1, n * hi_num / den);
  return {lo, std::min(hi, n)};
}

// Smallest index range along one axis keeping `keep` of the energy, trimming
// (1 - keep) / 2 from each end.
std::pair<int, int> energy_span(const std::vector<double>& e, double keep) {
  double total = 0.0;
  for (double v : e) total += v;
  const double tail = 0.5 * (1.0 - keep) * total;
  int lo = 0, hi = static_cast<int>(e.size()) - 1;
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(e.size()); ++i) {
    acc += e[i];
    if (acc > tail) {
      lo = i;
      break;
    }
  }
  acc = 0.0;
  for (int i = static_cast<int>(e.size()) - 1; i >= 0; --i) {
    acc += e[i];
    if (acc > tail) {
      hi = i;
      break;
    }
  }
  return {lo, std::max(lo, hi)};
}

void colour_exposure(const ImageBuffer& img, std::map<std::string, double>& out) {
  detail::AnchoredMean v, s, rg_mean, yb_mean, log_l;
  detail::CircularMean h;
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const auto& p = img.rgb[i];
    v.add(img.hsv[i].v);
    s.add(img.hsv[i].s);
    h.add(img.hsv[i].h);
    rg_mean.add(p.r - p.g);
    yb_mean.add(0.5 * (p.r + p.g) - p.b);
    log_l.add(std::log(1e-4 + luminance(p)));
  }
  double var_rg = 0.0, var_yb = 0.0;
  for (const auto& p : img.rgb) {
    const double a = (p.r - p.g) - rg_mean.value();
    const double b = (0.5 * (p.r + p.g) - p.b) - yb_mean.value();
    var_rg += a * a;
    var_yb += b * b;
  }
  const double n = static_cast<double>(img.pixels());
  out["exposure_mean_value"] = v.value();
  out["saturation_mean"] = s.value();
  out["hue_circular_mean"] = h.value();
  out["colorfulness"] = std::sqrt(var_rg / n + var_yb / n) +
                        0.3 * std::hypot(rg_mean.value(), yb_mean.value());
  out["log_avg_luminance"] = std::min(1.0, std::max(0.0, std::exp(log_l.value()) - 1e-4));
}

void rule_of_thirds(const ImageBuffer& img, std::map<std::string, double>& out) {
  const auto [x0, x1] = middle(img.width, 1, 2, 3);
  const auto [y0, y1] = middle(img.height, 1, 2, 3);
  detail::CircularMean h;
  detail::AnchoredMean s, v;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const auto& p = img.hsv[img.index(x, y)];
      h.add(p.h);
      s.add(p.s);
      v.add(p.v);
    }
  }
  out["thirds_hue"] = h.value();
  out["thirds_saturation"] = s.value();
  out["thirds_value"] = v.value();
}

void wavelet_and_dof(const ImageBuffer& img, const ExtractionParams& params,
                     std::map<std::string, double>& out) {
  const int levels = params.wavelet_levels;
  const int block = std::max(8, 1 << levels);
  const std::array<const char*, 3> names{"h", "s", "v"};
  const std::array<const char*, 3> dof_names{"dof_hue", "dof_saturation", "dof_value"};
  for (int c = 0; c < 3; ++c) {
    const auto padded = pad_replicate(channel_of(img, c), block);
    const auto dec = wavelet_decompose(padded, levels);
    const double total = padded.energy();
    double sum = 0.0;
    for (int l = 0; l < levels; ++l) {
      const double f = ratio(dec.levels[l].detail_energy(), total);
      if (l < 3) out["wavelet_" + std::string(names[c]) + "_l" + std::to_string(l + 1)] = f;
      sum += f;
    }
    for (int l = levels; l < 3; ++l)
      out["wavelet_" + std::string(names[c]) + "_l" + std::to_string(l + 1)] = 0.0;
    out["wavelet_" + std::string(names[c]) + "_sum"] = sum;

    const auto& coarse = dec.levels.back();
    const auto [x0, x1] = middle(coarse.lh.width, 1, 3, 4);
    const auto [y0, y1] = middle(coarse.lh.height, 1, 3, 4);
    double centre = 0.0;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        for (const Channel* band : {&coarse.lh, &coarse.hl, &coarse.hh}) {
          const double v = (*band)(x, y);
          centre += v * v;
        }
      }
    }
    out[dof_names[c]] = ratio(centre, coarse.detail_energy());
  }
}

void regions(const ImageBuffer& img, const ExtractionParams& params,
             std::map<std::string, double>& out) {
  const auto seg = segment_image(img, params.segments);
  const double n = static_cast<double>(img.pixels());
  int significant = 0;
  for (const auto& s : seg.segments)
    if (static_cast<double>(s.area) >= params.region_min_frac * n) ++significant;
  out["region_count"] = significant;
  for (std::size_t i = 0; i < 5; ++i)
    out["region_size_" + std::to_string(i + 1)] =
        i < seg.segments.size() ? static_cast<double>(seg.segments[i].area) / n : 0.0;
  const auto& largest = seg.segments.front();
  out["largest_segment_value"] = largest.mean_value;
  out["largest_segment_hue"] = largest.mean_hue;
  out["largest_segment_saturation"] = largest.mean_saturation;
  out["largest_segment_convexity"] = segment_convexity(seg, 0);

  const auto rag = build_rag(seg, params.rag);
  out["rag_segment_count"] = rag.merged_count;
  out["rag_best_ncut"] = rag.best_ncut;
  out["rag_cut_depth"] = rag.cut_depth;
}

void ke_composition(const ImageBuffer& img, const ExtractionParams& params,
                    std::map<std::string, double>& out) {
  const int w = img.width;
  const int h = img.height;
  std::vector<double> lum(img.pixels());
  for (std::size_t i = 0; i < lum.size(); ++i) lum[i] = luminance(img.rgb[i]);
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return lum[static_cast<std::size_t>(y) * w + x];
  };

  // Laplacian as a sum of neighbour differences, so flat regions give exact 0.
  std::vector<double> col_e(w, 0.0), row_e(h, 0.0);
  double edge_total = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = at(x, y);
      const double lap = (at(x + 1, y) - c) + (at(x - 1, y) - c) + (at(x, y + 1) - c) +
                         (at(x, y - 1) - c);
      const double e = std::fabs(lap);
      col_e[x] += e;
      row_e[y] += e;
      edge_total += e;
    }
  }
  if (edge_total > 0.0) {
    const auto [x0, x1] = energy_span(col_e, params.edge_energy);
    const auto [y0, y1] = energy_span(row_e, params.edge_energy);
    out["edge_bbox_area"] = static_cast<double>(x1 - x0 + 1) / w *
                            (static_cast<double>(y1 - y0 + 1) / h);
  } else {
    out["edge_bbox_area"] = 0.0;
  }

  std::array<double, 18> hue_hist{};
  bool any = false;
  for (const auto& p : img.hsv) {
    if (p.s > 0.2 && p.v > 0.15 && p.v < 0.95) {
      hue_hist[std::min(17, static_cast<int>(p.h / 20.0))] += 1.0;
      any = true;
    }
  }
  if (any) {
    const double peak = *std::max_element(hue_hist.begin(), hue_hist.end());
    out["hue_count"] = static_cast<double>(
        std::count_if(hue_hist.begin(), hue_hist.end(), [&](double m) { return m > 0.05 * peak; }));
  } else {
    out["hue_count"] = 1.0;
  }

  const auto [lmin, lmax] = std::minmax_element(lum.begin(), lum.end());
  if (*lmin == *lmax) {
    out["blur_sharpness"] = 0.0;
  } else {
    cv::Mat src(h, w, CV_64F, lum.data());
    cv::Mat spec;
    cv::dft(src, spec, cv::DFT_COMPLEX_OUTPUT);
    double total = 0.0, high = 0.0;
    for (int v = 0; v < h; ++v) {
      const auto* row = spec.ptr<cv::Vec2d>(v);
      const double fy = static_cast<double>(std::min(v, h - v)) / h / 0.5;
      for (int u = 0; u < w; ++u) {
        const double fx = static_cast<double>(std::min(u, w - u)) / w / 0.5;
        const double mag = std::hypot(row[u][0], row[u][1]);
        total += mag;
        if (std::hypot(fx, fy) > params.blur_cutoff) high += mag;
      }
    }
    out["blur_sharpness"] = ratio(high, total);
  }

  out["contrast_width"] = stats::percentile(lum, 0.99) - stats::percentile(lum, 0.01);
  detail::AnchoredMean bright;
  for (double l : lum) bright.add(l);
  out["brightness"] = bright.value();
}

}  // namespace

std::string to_string(FeatureFamily f) {
  for (const auto& [fam, name] : kFamilyNames)
    if (fam == f) return name;
  return "unknown";
}

FeatureFamily parse_feature_family(std::string_view s) {
  for (const auto& [fam, name] : kFamilyNames)
    if (s == name) return fam;
  throw Error(Errc::SchemaError, "unknown feature family '" + std::string(s) + "'");
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FeatureRegistry::FeatureRegistry(std::vector<FeatureDescriptor> features, ExtractionParams params)
    : features_(std::move(features)), params_(params) {
  for (std::size_t i = 0; i < features_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (features_[i].id == features_[j].id)
        throw Error(Errc::SchemaError, "duplicate feature id '" + features_[i].id + "'");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical(features_, params_).dump())));
  hash_ = buf;
}

FeatureRegistry FeatureRegistry::standard(ExtractionParams params) {
  return FeatureRegistry(standard_catalog(), params);
}

std::optional<std::size_t> FeatureRegistry::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].id == id) return i;
  return std::nullopt;
}

std::vector<std::string> FeatureRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& f : features_) out.push_back(f.id);
  return out;
}

json FeatureRegistry::manifest() const {
  auto j = canonical(features_, params_);
  j["hash"] = hash_;
  return j;
}

FeatureRegistry FeatureRegistry::from_manifest(const json& j) {
  std::vector<FeatureDescriptor> features;
  ExtractionParams params;
  try {
    for (const auto& f : j.at("features")) {
      FeatureDescriptor d;
      d.id = f.at("id").get<std::string>();
      d.family = parse_feature_family(f.at("family").get<std::string>());
      d.human_name = f.at("human_name").get<std::string>();
      d.tunable = f.at("tunable").get<bool>();
      if (f.contains("lower")) d.lower = f["lower"].get<double>();
      if (f.contains("upper")) d.upper = f["upper"].get<double>();
      features.push_back(std::move(d));
    }
    params = params_from_json(j.at("params"));
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("bad registry manifest: ") + e.what());
  }
  FeatureRegistry reg(std::move(features), params);
  if (j.contains("hash") && j["hash"].get<std::string>() != reg.hash())
    throw Error(Errc::RegistryMismatch, "manifest hash " + j["hash"].get<std::string>() +
                                            " does not match its contents (" + reg.hash() + ")");
  return reg;
}

std::map<std::string, double> compute_catalog(const ImageBuffer& img,
                                              const ExtractionParams& params) {
  std::map<std::string, double> out;
  colour_exposure(img, out);
  rule_of_thirds(img, out);
  wavelet_and_dof(img, params, out);
  out["size_sum"] = img.source_width + img.source_height;
  out["aspect_ratio"] = static_cast<double>(img.source_width) / img.source_height;
  regions(img, params, out);
  ke_composition(img, params, out);
  return out;
}

FeatureVector extract_features(const ImageBuffer& img, const FeatureRegistry& registry) {
  const auto all = compute_catalog(img, registry.params());
  FeatureVector fv;
  fv.registry_hash = registry.hash();
  for (const auto& d : registry.features()) {
    const auto it = all.find(d.id);
    if (it == all.end()) throw Error(Errc::UnknownFeature, "no extractor for feature '" + d.id + "'");
    fv.values.push_back(std::isfinite(it->second) ? it->second : 0.0);
  }
  return fv;
}

void write_feature_dump(const std::filesystem::path& path, const FeatureRegistry& registry,
                        std::span<const FeatureRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "post_id";
  for (const auto& d : registry.features()) out << ',' << d.id;
  out << '\n';
  for (const auto& r : rows) {
    if (r.values.size() != registry.size())
      throw Error(Errc::DimensionMismatch, "feature row " + r.post_id + " has wrong length");
    out << adlens::detail::csv_quote(r.post_id);
    for (double v : r.values) out << ',' << adlens::detail::format_double(v);
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_dump(const std::filesystem::path& path,
                                          const FeatureRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  const auto rows = adlens::detail::read_csv(in);
  if (rows.empty()) throw Error(Errc::SchemaError, "feature dump has no header");
  std::vector<std::string> expected{"post_id"};
  for (const auto& id : registry.ids()) expected.push_back(id);
  if (rows.front().fields != expected)
    throw Error(Errc::SchemaError, "feature dump header does not match the registry");
  std::vector<FeatureRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != expected.size())
      throw Error(Errc::SchemaError, "line " + std::to_string(rows[r].line) + ": wrong field count");
    FeatureRow row{f[0], {}};
    for (std::size_t i = 1; i < f.size(); ++i) {
      double v = 0.0;
      const auto res = std::from_chars(f[i].data(), f[i].data() + f[i].size(), v);
      if (res.ec != std::errc() || res.ptr != f[i].data() + f[i].size())
        throw Error(Errc::SchemaError,
                    "line " + std::to_string(rows[r].line) + ": bad number '" + f[i] + "'");
      row.values.push_back(v);
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace adlens::aesthetics
