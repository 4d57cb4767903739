#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adlens/bias_kind.hpp"

namespace adlens::corpus {

using Timestamp = std::chrono::sys_seconds;

struct PostRecord {
  std::string post_id;
  std::string page_id;
  std::string image_path;
  std::uint64_t likes = 0;
  std::uint64_t retweets = 0;
  Timestamp timestamp{};
  std::string text;
  std::set<BiasKind> external_bias_labels;
  std::optional<std::uint64_t> followers;

  friend bool operator==(const PostRecord&, const PostRecord&) = default;
};

struct PageStats {
  std::string page_id;
  double mu = 0.0;
  double sigma = 0.0;  // population convention
  std::size_t n_posts = 0;
  std::optional<std::uint64_t> followers;
};

struct ScoredPost {
  PostRecord post;
  double epsilon = 0.0;    // likes + retweets
  double epsilon_n = 0.0;  // page z-score
  std::optional<double> epsilon_nt;
};

enum class Format { Csv, JsonLines };

std::optional<Format> parse_format(std::string_view name);

struct Reject {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<PostRecord> records;
  std::vector<Reject> rejects;
};

// RFC 3339 parsing; offsets are folded into UTC.
std::optional<Timestamp> parse_rfc3339(std::string_view text);
std::string format_rfc3339(Timestamp ts);

double compute_engagement(std::uint64_t likes, std::uint64_t retweets);

// Throws Error{DegeneratePage} when fewer than two scores or zero spread.
std::pair<PageStats, std::vector<double>> normalize_page(std::span<const double> scores);

// Malformed rows become rejects; a CSV header missing a required column is
// a SchemaError for the whole file.
LoadResult load_corpus(const std::filesystem::path& path, Format format);

void write_corpus(const std::filesystem::path& path, std::span<const PostRecord> records,
                  Format format);
void write_rejects(const std::filesystem::path& path, std::span<const Reject> rejects);

struct ScoringResult {
  std::vector<ScoredPost> posts;
  std::vector<PageStats> pages;
  // page ids dropped because normalization was impossible
  std::vector<std::string> excluded_pages;
};

// Groups records by page, computes ε and ε_N. Degenerate pages are excluded.
ScoringResult score_corpus(std::span<const PostRecord> records);

struct PageSample {
  std::string page_id;
  double followers = 0.0;
  std::vector<double> scores;
};

struct PageSummaryRow {
  std::string page_id;
  double followers = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double variance = 0.0;
};

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  std::vector<PageSummaryRow> pages;
};

// Correlation between follower count and mean page engagement.
// Throws Error{InsufficientData} with fewer than three pages.
CorrelationReport page_correlation_report(std::span<const PageSample> pages);

}  // namespace adlens::corpus
