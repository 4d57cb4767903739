#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adlens/aesthetics/image.hpp"
#include "adlens/aesthetics/rag.hpp"
#include "adlens/aesthetics/segmentation.hpp"

namespace adlens::aesthetics {

enum class FeatureFamily {
  ColorExposure,
  RuleOfThirds,
  WaveletTexture,
  SizeAspect,
  Region,
  DepthOfField,
  KeComposition,
  RAG,
};

std::string to_string(FeatureFamily f);
FeatureFamily parse_feature_family(std::string_view s);

struct FeatureDescriptor {
  std::string id;
  FeatureFamily family = FeatureFamily::ColorExposure;
  std::string human_name;
  bool tunable = false;
  // Tuned values are clamped into [lower, upper] when set.
  std::optional<double> lower;
  std::optional<double> upper;
};

// Constants that change feature values. They are part of the registry hash
// so a model can never be paired with features computed differently.
struct ExtractionParams {
  SegmentOptions segments;
  RagOptions rag;
  int wavelet_levels = 3;
  double blur_cutoff = 0.2;       // fraction of Nyquist
  double edge_energy = 0.96;      // Laplacian energy held by the edge box
  double region_min_frac = 0.01;  // "significant segment" area
  int max_side = kMaxSide;
};

class FeatureRegistry {
 public:
  FeatureRegistry(std::vector<FeatureDescriptor> features, ExtractionParams params);

  // The built-in 43-feature catalog.
  static FeatureRegistry standard(ExtractionParams params = {});

  const std::vector<FeatureDescriptor>& features() const { return features_; }
  const ExtractionParams& params() const { return params_; }
  std::size_t size() const { return features_.size(); }
  const FeatureDescriptor& operator[](std::size_t i) const { return features_[i]; }
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::vector<std::string> ids() const;

  // FNV-1a 64 over the canonical manifest, as 16 hex digits.
  const std::string& hash() const { return hash_; }

  // {"hash", "features": [...], "params": {...}}
  nlohmann::json manifest() const;
  static FeatureRegistry from_manifest(const nlohmann::json& j);

 private:
  std::vector<FeatureDescriptor> features_;
  ExtractionParams params_;
  std::string hash_;
};

struct FeatureVector {
  std::string registry_hash;
  std::vector<double> values;
};

// Every feature of the built-in catalog keyed by id.
std::map<std::string, double> compute_catalog(const ImageBuffer& img, const ExtractionParams& params);

// Values laid out in registry order. Throws UnknownFeature for ids outside
// the catalog.
FeatureVector extract_features(const ImageBuffer& img, const FeatureRegistry& registry);

struct FeatureRow {
  std::string post_id;
  std::vector<double> values;
};

// CSV with header post_id,<ids...>; values written with round-trip precision.
void write_feature_dump(const std::filesystem::path& path, const FeatureRegistry& registry,
                        std::span<const FeatureRow> rows);
// Throws SchemaError when the header does not match the registry ids.
std::vector<FeatureRow> read_feature_dump(const std::filesystem::path& path,
                                          const FeatureRegistry& registry);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace adlens::aesthetics
