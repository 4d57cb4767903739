#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adlens/aesthetics/image.hpp"
#include "adlens/bias_kind.hpp"

namespace adlens::synthetic {

struct Shape {
  bool ellipse = false;
  double cx = 0.5, cy = 0.5;  // fractions of width/height
  double rx = 0.1, ry = 0.1;
  double hue = 0.0, saturation = 0.5, value = 0.5;
};

struct ImageRecipe {
  int width = 128;
  int height = 96;
  double hue = 0.0;  // degrees
  double saturation = 0.5;
  double value = 0.5;
  std::vector<Shape> shapes;
  double blur_sigma = 0.0;  // pixels
  double noise = 0.0;       // uniform amplitude
  std::uint64_t noise_seed = 0;
};

ImageRecipe random_recipe(std::mt19937_64& rng);
aesthetics::ImageBuffer render(const ImageRecipe& recipe);

struct CorpusOptions {
  std::size_t posts = 600;
  std::size_t pages = 6;
  std::uint64_t seed = 42;
  // Fraction of posts that carry exactly one bias, spread evenly over the kinds.
  double bias_fraction = 0.5;
  std::vector<BiasKind> kinds{kAllBiasKinds.begin(), kAllBiasKinds.end()};
  // Additive shifts in units of the planted score's standard deviation.
  std::map<BiasKind, double> boosts{{BiasKind::HumanPresence, 1.5},
                                    {BiasKind::AnimalPresence, 2.0},
                                    {BiasKind::Holiday, 1.75},
                                    {BiasKind::Discount, 1.25}};
  double noise = 0.1;
  std::vector<std::string> planted_features{"exposure_mean_value", "saturation_mean", "aspect_ratio",
                                            "blur_sharpness", "size_sum"};
  std::vector<double> planted_weights{1.0, 0.8, -0.7, 0.6, 0.5};
};

struct PlantedPost {
  std::string post_id;
  double true_score = 0.0;
  std::optional<BiasKind> bias;
};

struct SyntheticCorpus {
  std::filesystem::path corpus;  // CSV
  std::filesystem::path embeddings;
  std::vector<std::filesystem::path> lexicons;
  std::vector<std::string> planted_features;
  std::vector<PlantedPost> posts;
};

// Writes images/, corpus.csv, embeddings.txt and the discount/holiday
// lexicons under `dir`. The planted score is a weighted sum of the
// standardized planted features as extracted from each rendered image.
SyntheticCorpus generate_corpus(const std::filesystem::path& dir, const CorpusOptions& opts = {});

}  // namespace adlens::synthetic
