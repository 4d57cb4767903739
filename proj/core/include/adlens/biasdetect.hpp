#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adlens/bias_kind.hpp"
#include "adlens/corpus.hpp"

namespace adlens::bias {

// ---------------------------------------------------------------------------
// Local outlier factor
// ---------------------------------------------------------------------------

using Point = std::vector<double>;

// Floor applied to the mean reachability distance so duplicate points give a
// finite local reachability density.
inline constexpr double kLofEpsilon = 1e-12;

// Raw LOF_k per point. Neighborhoods include every point tied with the k-th
// nearest distance. Throws Error{BadK} unless 1 <= k < n.
std::vector<double> lof_raw(std::span<const Point> points, std::size_t k);

// LOF_k min-max normalized to [0, 1] across the batch (all zeros when every
// raw score is equal).
std::vector<double> lof_scores(std::span<const Point> points, std::size_t k);

// ---------------------------------------------------------------------------
// Lexicons and embeddings
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> entries;
};

struct EmbeddingLoad {
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

// Text format: "word v1 ... vd" per line. Duplicate words keep the last
// occurrence. Throws DimensionMismatch or IoError.
EmbeddingLoad load_embeddings(const std::filesystem::path& path);

struct Expansion {
  std::vector<std::string> words;          // seeds first, then neighbors
  std::vector<std::string> missing_seeds;  // seeds absent from the table
};

// Union of seeds with each present seed's m nearest vocabulary words by
// cosine similarity (ties broken lexicographically). Words listed in
// `stoplist` are removed from the expansion but never from the seeds.
Expansion expand_keywords(std::span<const std::string> seeds, const EmbeddingTable& table,
                          std::size_t m, std::span<const std::string> stoplist = {});

struct HolidayWindow {
  std::string name;
  unsigned month = 1;
  unsigned day = 1;
  int pre_days = 7;
  int post_days = 7;

  // True when the UTC calendar date of `ts` lies within
  // [date - pre_days, date + post_days] for any year around ts.
  bool contains(corpus::Timestamp ts) const;
};

struct Lexicon {
  BiasKind kind = BiasKind::Discount;
  std::vector<std::string> seed_words;
  std::vector<std::string> expanded_words;
  std::vector<std::string> stoplist;
  std::vector<HolidayWindow> holiday_windows;
};

// Parses the JSON lexicon config. expanded_words is initialized to the
// seeds; call expand_lexicon to grow it.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::string_view json_text);

void expand_lexicon(Lexicon& lexicon, const EmbeddingTable& table, std::size_t m);

// Lowercases ASCII letters and splits on anything that is not alphanumeric.
// Bytes >= 0x80 are kept inside tokens.
std::vector<std::string> tokenize(std::string_view text);

std::set<BiasKind> classify_text_bias(std::string_view text, corpus::Timestamp timestamp,
                                      std::span<const Lexicon> lexicons);

// Hook for out-of-band visual detectors (faces, animals). Implementations
// must be thread-safe and return only visual kinds.
class VisualBiasDetector {
 public:
  virtual ~VisualBiasDetector() = default;
  virtual std::set<BiasKind> detect(const corpus::PostRecord& post) const = 0;
};

struct LabeledCorpus {
  std::vector<corpus::ScoredPost> unbiased;
  std::map<BiasKind, std::vector<corpus::ScoredPost>> biased;
  std::vector<corpus::ScoredPost> excluded_multibias;
};

LabeledCorpus assign_bias_labels(std::span<const corpus::ScoredPost> posts,
                                 std::span<const Lexicon> lexicons,
                                 std::span<const VisualBiasDetector* const> detectors = {});

}  // namespace adlens::bias
