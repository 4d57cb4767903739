#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adlens/aesthetics/features.hpp"
#include "adlens/biasdetect.hpp"
#include "adlens/corpus.hpp"
#include "adlens/error.hpp"
#include "adlens/model.hpp"

namespace adlens::pipeline {

struct DebiasConfig {
  bool enabled = true;
  int degree = 3;
  bool auto_degree = false;
  std::size_t bins = 50;
  std::optional<double> bandwidth;
  std::size_t max_iters = 1000;
  double learn_rate = 1.0;
  double tol = 1e-8;
  // Bias classes with fewer posts are dropped rather than transformed.
  std::size_t min_posts = 10;
};

struct ModelConfig {
  model::Hyperparams hp;
  double tol = 1e-3;
  double test_fraction = 0.25;
  bool grid_search = false;
  int folds = 5;
  std::vector<double> grid_C{1.0, 10.0, 100.0};
  std::vector<double> grid_gamma;  // empty: the default gamma only
  std::size_t significance_top = 5;
};

struct TunerDefaults {
  int k = 2;
  double s = 20.0;
  double t = 4.0;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  corpus::Format format = corpus::Format::Csv;
  std::vector<std::filesystem::path> lexicons;
  std::optional<std::filesystem::path> embeddings;
  std::size_t expansion_m = 20;
  // Appended to the holiday lexicon's windows.
  std::vector<bias::HolidayWindow> holidays;
  DebiasConfig debias;
  aesthetics::ExtractionParams registry;
  ModelConfig model;
  TunerDefaults tuner;
  std::filesystem::path artifacts;
  ServiceConfig service;
  std::uint64_t seed = 42;
};

// Relative paths are resolved against base_dir. Throws ConfigError.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& c);

// Checks that every referenced input exists and numeric options are in
// range. Throws ConfigError.
void validate(const PipelineConfig& c);

enum class Stage { Ingest, Debias, Features, Train, Evaluate };

inline constexpr Stage kAllStages[] = {Stage::Ingest, Stage::Debias, Stage::Features, Stage::Train,
                                       Stage::Evaluate};

std::string_view to_string(Stage s);

// A failure inside a stage; code() is the cause's code.
class StageError : public Error {
 public:
  StageError(Stage stage, Errc cause, const std::string& message)
      : Error(cause, "stage " + std::string(to_string(stage)) + ": " + message), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

// 0 success, 2 configuration, 3 data, 4 runtime stage failure.
int exit_code(Errc code);

// Files under the artifact directory.
struct ArtifactStore {
  std::filesystem::path root;

  std::filesystem::path scores() const { return root / "ingest" / "scores.csv"; }
  std::filesystem::path labels() const { return root / "ingest" / "labels.csv"; }
  std::filesystem::path pages() const { return root / "ingest" / "pages.json"; }
  std::filesystem::path rejects() const { return root / "ingest" / "rejects.jsonl"; }
  std::filesystem::path lexicons() const { return root / "ingest" / "lexicons.json"; }
  std::filesystem::path ingest_summary() const { return root / "ingest" / "summary.json"; }
  std::filesystem::path transform(std::string_view bias) const {
    return root / "debias" / "transforms" / (std::string(bias) + ".json");
  }
  std::filesystem::path targets() const { return root / "debias" / "targets.csv"; }
  std::filesystem::path debias_summary() const { return root / "debias" / "summary.json"; }
  std::filesystem::path registry() const { return root / "features" / "registry.json"; }
  std::filesystem::path features() const { return root / "features" / "features.csv"; }
  std::filesystem::path features_summary() const { return root / "features" / "summary.json"; }
  std::filesystem::path model() const { return root / "model" / "model.json"; }
  std::filesystem::path classifier() const { return root / "model" / "classifier.json"; }
  std::filesystem::path significance_model() const { return root / "model" / "significance.json"; }
  std::filesystem::path split() const { return root / "model" / "split.json"; }
  std::filesystem::path evaluation() const { return root / "evaluation.json"; }
  std::filesystem::path stale_marker() const { return root / "STALE.json"; }

  bool stale() const { return std::filesystem::exists(stale_marker()); }
  aesthetics::FeatureRegistry load_registry() const;
  // Throws RegistryMismatch when the model's hash differs from `registry`.
  model::EngagementModel load_model(const aesthetics::FeatureRegistry& registry) const;
};

// Runs one stage from the artifacts of the previous ones. On failure the
// artifact directory is marked stale and a StageError is thrown.
void run_stage(const PipelineConfig& c, Stage s);

// All stages in order; returns the evaluation report.
nlohmann::json run_pipeline(const PipelineConfig& c);

}  // namespace adlens::pipeline
