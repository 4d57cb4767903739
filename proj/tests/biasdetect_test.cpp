#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "adlens/biasdetect.hpp"
#include "adlens/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace adlens;
using namespace adlens::bias;
using adlens::oracle::brute_force_lof;

namespace {

EmbeddingTable toy_table() {
  EmbeddingTable t;
  t.dimension = 3;
  t.entries["christmas"] = {1.0, 0.1, 0.0};
  t.entries["xmas"] = {0.9, 0.12, 0.01};
  t.entries["holiday"] = {0.6, 0.5, 0.1};
  t.entries["sale"] = {0.0, 0.1, 1.0};
  t.entries["cat"] = {-0.2, 1.0, 0.0};
  return t;
}

corpus::Timestamp ts(const char* s) { return *corpus::parse_rfc3339(s); }

Lexicon discount_lexicon() {
  Lexicon lex;
  lex.kind = BiasKind::Discount;
  lex.seed_words = {"free", "discount", "sale", "offer"};
  lex.expanded_words = lex.seed_words;
  return lex;
}

Lexicon holiday_lexicon() {
  Lexicon lex;
  lex.kind = BiasKind::Holiday;
  lex.seed_words = {"christmas", "xmas", "thanksgiving"};
  lex.expanded_words = lex.seed_words;
  lex.holiday_windows.push_back({"christmas", 12, 25, 7, 7});
  return lex;
}

corpus::ScoredPost post(std::string id, std::string text, std::set<BiasKind> labels = {}) {
  corpus::ScoredPost sp;
  sp.post.post_id = std::move(id);
  sp.post.text = std::move(text);
  sp.post.timestamp = ts("2023-07-04T12:00:00Z");
  sp.post.external_bias_labels = std::move(labels);
  return sp;
}

}  // namespace

TEST(Lof, UniformGridIsInlierEverywhereButCorners) {
  std::vector<Point> grid;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) grid.push_back({double(i), double(j)});
  const auto raw = lof_raw(grid, 5);
  const auto oracle = brute_force_lof(grid, 5);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    EXPECT_NEAR(raw[p], oracle[p], 1e-9);
    const bool corner = (grid[p][0] == 0 || grid[p][0] == 9) && (grid[p][1] == 0 || grid[p][1] == 9);
    if (corner) {
      EXPECT_NEAR(raw[p], 1.1185363572392955, 1e-9);
    } else {
      EXPECT_GE(raw[p], 0.9);
      EXPECT_LE(raw[p], 1.1);
    }
  }
}

TEST(Lof, FarOutlierGetsMaximumScore) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Point> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({nd(rng), nd(rng)});
  pts.push_back({100.0, 0.0});
  const auto scores = lof_scores(pts, 5);
  EXPECT_DOUBLE_EQ(scores.back(), 1.0);
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) EXPECT_LT(scores[i], 1.0);
}

TEST(Lof, IdenticalPairIsEpsilonFloored) {
  std::vector<Point> pts = {{3.0}, {3.0}};
  const auto raw = lof_raw(pts, 1);
  EXPECT_DOUBLE_EQ(raw[0], 1.0);
  EXPECT_DOUBLE_EQ(raw[1], 1.0);
}

TEST(Lof, BadK) {
  std::vector<Point> pts = {{0.0}, {1.0}, {2.0}};
  for (std::size_t k : {0u, 3u, 4u}) {
    try {
      lof_raw(pts, k);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BadK);
    }
  }
}

TEST(Lof, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 1 + trial % 3;
    const std::size_t n = 20 + static_cast<std::size_t>(trial) * 9;
    std::vector<Point> pts(n, Point(dim));
    for (auto& p : pts)
      for (auto& v : p) v = std::round(u(rng) * 4) / 4;  // coarse values force ties and duplicates
    const std::size_t k = 1 + trial % 7;
    const auto raw = lof_raw(pts, k);
    const auto oracle = brute_force_lof(pts, k);
    // Floored densities of duplicate clusters push LOF to ~1e11, so compare relatively.
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(raw[i], oracle[i], 1e-9 * std::max(1.0, std::abs(oracle[i])));
  }
}

TEST(Lof, NormalizedScoresAreScaleInvariant) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> nd(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point> pts(60, Point(2));
    for (auto& p : pts)
      for (auto& v : p) v = nd(rng);
    auto scaled = pts;
    for (auto& p : scaled)
      for (auto& v : p) v *= 37.5;
    const auto a = lof_scores(pts, 7);
    const auto b = lof_scores(scaled, 7);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_GE(a[i], 0.0);
      EXPECT_LE(a[i], 1.0);
      EXPECT_NEAR(a[i], b[i], 1e-9);
    }
  }
}

TEST(Embeddings, LoadsSmallFile) {
  auto dir = test::scratch_dir("emb_small");
  test::write_file(dir / "e.txt", "cat 0.1 0.2 0.3 0.4\ndog 1 2 3 4\nsale -1 0 0 1e-3\n");
  auto res = load_embeddings(dir / "e.txt");
  EXPECT_EQ(res.table.dimension, 4u);
  EXPECT_EQ(res.table.entries.size(), 3u);
  EXPECT_EQ(res.table.entries.at("sale")[3], 1e-3);
  EXPECT_TRUE(res.warnings.empty());
}

TEST(Embeddings, MixedDimensionsFail) {
  auto dir = test::scratch_dir("emb_mixed");
  test::write_file(dir / "e.txt", "cat 0.1 0.2 0.3 0.4\ndog 1 2 3 4 5\n");
  try {
    load_embeddings(dir / "e.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
  EXPECT_THROW(load_embeddings(dir / "missing.txt"), Error);
}

TEST(Embeddings, DuplicateKeepsLastWithWarning) {
  auto dir = test::scratch_dir("emb_dup");
  test::write_file(dir / "e.txt", "cat 1 0\ncat 0 1\n");
  auto res = load_embeddings(dir / "e.txt");
  EXPECT_EQ(res.table.entries.at("cat"), (std::vector<double>{0, 1}));
  EXPECT_EQ(res.warnings.size(), 1u);
}

TEST(Embeddings, LargeFileRoundTripsBitExact) {
  auto dir = test::scratch_dir("emb_large");
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> nd(0.0, 0.5);
  std::ostringstream file;
  std::vector<std::pair<std::string, std::vector<std::string>>> expected;
  for (int w = 0; w < 50000; ++w) {
    std::string word = "w" + std::to_string(w);
    file << word;
    std::vector<std::string> toks;
    for (int d = 0; d < 8; ++d) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", nd(rng));
      toks.emplace_back(buf);
      file << ' ' << buf;
    }
    file << '\n';
    expected.emplace_back(word, std::move(toks));
  }
  test::write_file(dir / "e.txt", file.str());
  auto res = load_embeddings(dir / "e.txt");
  ASSERT_EQ(res.table.entries.size(), 50000u);
  for (const auto& [word, toks] : expected) {
    const auto& v = res.table.entries.at(word);
    for (std::size_t d = 0; d < toks.size(); ++d) ASSERT_EQ(v[d], std::strtod(toks[d].c_str(), nullptr));
  }
}

TEST(ExpandKeywords, NearestNeighborByCosine) {
  const auto table = toy_table();
  // Oracle: brute-force cosine ranking over the crafted table.
  const auto& c = table.entries.at("christmas");
  std::string best;
  double best_cos = -2;
  for (const auto& [w, v] : table.entries) {
    if (w == "christmas") continue;
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < 3; ++i) dot += c[i] * v[i], na += c[i] * c[i], nb += v[i] * v[i];
    const double cos = dot / std::sqrt(na * nb);
    if (cos > best_cos) best_cos = cos, best = w;
  }
  ASSERT_EQ(best, "xmas");
  const std::vector<std::string> seeds = {"christmas"};
  EXPECT_EQ(expand_keywords(seeds, table, 1).words, (std::vector<std::string>{"christmas", "xmas"}));
  EXPECT_EQ(expand_keywords(seeds, table, 2).words,
            (std::vector<std::string>{"christmas", "xmas", "holiday"}));
}

TEST(ExpandKeywords, ZeroNeighborsReturnsSeeds) {
  const std::vector<std::string> seeds = {"christmas", "Sale", "absent"};
  auto out = expand_keywords(seeds, toy_table(), 0);
  EXPECT_EQ(out.words, (std::vector<std::string>{"christmas", "sale", "absent"}));
  EXPECT_EQ(out.missing_seeds, (std::vector<std::string>{"absent"}));
}

TEST(ExpandKeywords, NoSeedInVocabulary) {
  const std::vector<std::string> seeds = {"qqqq"};
  try {
    expand_keywords(seeds, toy_table(), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoSeedInVocabulary);
  }
}

TEST(ExpandKeywords, TiesBreakLexicographicallyAndStoplistFilters) {
  EmbeddingTable t;
  t.dimension = 2;
  t.entries["seed"] = {1, 0};
  t.entries["zeta"] = {2, 0};
  t.entries["alpha"] = {3, 0};
  t.entries["mid"] = {1, 1};
  const std::vector<std::string> seeds = {"seed"};
  for (int rep = 0; rep < 5; ++rep)
    EXPECT_EQ(expand_keywords(seeds, t, 1).words, (std::vector<std::string>{"seed", "alpha"}));
  const std::vector<std::string> stop = {"alpha"};
  EXPECT_EQ(expand_keywords(seeds, t, 2, stop).words, (std::vector<std::string>{"seed", "zeta"}));
}

TEST(Lexicon, ParsesConfig) {
  auto lex = parse_lexicon(R"({"kind":"holiday","seeds":["Christmas","xmas"],"stoplist":["easter"],
      "holidays":[{"name":"christmas","date":"12-25","pre_days":7,"post_days":7},{"name":"halloween","date":"10-31"}]})");
  EXPECT_EQ(lex.kind, BiasKind::Holiday);
  EXPECT_EQ(lex.seed_words, (std::vector<std::string>{"christmas", "xmas"}));
  EXPECT_EQ(lex.expanded_words, lex.seed_words);
  ASSERT_EQ(lex.holiday_windows.size(), 2u);
  EXPECT_EQ(lex.holiday_windows[1].pre_days, 7);
  EXPECT_THROW(parse_lexicon(R"({"kind":"holiday","seeds":[],"holidays":[{"date":"2023-12-25"}]})"), Error);
  EXPECT_THROW(parse_lexicon(R"({"kind":"brand","seeds":[]})"), Error);
}

TEST(HolidayWindow, WrapsAcrossNewYear) {
  HolidayWindow w{"christmas", 12, 25, 7, 7};
  EXPECT_TRUE(w.contains(ts("2023-12-18T00:00:00Z")));
  EXPECT_TRUE(w.contains(ts("2024-01-01T23:59:59Z")));
  EXPECT_FALSE(w.contains(ts("2024-01-02T00:00:00Z")));
  EXPECT_FALSE(w.contains(ts("2023-12-17T23:59:59Z")));
}

TEST(ClassifyText, Examples) {
  const std::vector<Lexicon> lexicons = {discount_lexicon(), holiday_lexicon()};
  EXPECT_EQ(classify_text_bias("Huge SALE today only!", ts("2023-03-01T00:00:00Z"), lexicons),
            std::set<BiasKind>{BiasKind::Discount});
  EXPECT_EQ(classify_text_bias("Merry Christmas to all", ts("2023-12-24T10:00:00Z"), lexicons),
            std::set<BiasKind>{BiasKind::Holiday});
  EXPECT_TRUE(classify_text_bias("Merry Christmas", ts("2023-07-04T10:00:00Z"), lexicons).empty());
}

TEST(ClassifyText, WholeTokenCaseInsensitive) {
  const std::vector<Lexicon> lexicons = {discount_lexicon()};
  const auto when = ts("2023-03-01T00:00:00Z");
  EXPECT_TRUE(classify_text_bias("Big sales event", when, lexicons).empty());
  EXPECT_TRUE(classify_text_bias("wholesale", when, lexicons).empty());
  EXPECT_EQ(classify_text_bias("FREE-shipping", when, lexicons).size(), 1u);
  auto expanded = discount_lexicon();
  expanded.expanded_words.push_back("sales");
  const std::vector<Lexicon> with_sales = {expanded};
  EXPECT_EQ(classify_text_bias("Big sales event", when, with_sales).size(), 1u);
}

TEST(AssignBiasLabels, Examples) {
  const std::vector<Lexicon> lexicons = {discount_lexicon(), holiday_lexicon()};
  std::vector<corpus::ScoredPost> posts = {
      post("h", "our new look", {BiasKind::HumanPresence}),
      post("multi", "discount on kibble", {BiasKind::AnimalPresence}),
  };
  auto out = assign_bias_labels(posts, lexicons);
  EXPECT_TRUE(out.unbiased.empty());
  ASSERT_EQ(out.biased.size(), 1u);
  EXPECT_EQ(out.biased.at(BiasKind::HumanPresence).front().post.post_id, "h");
  ASSERT_EQ(out.excluded_multibias.size(), 1u);
  EXPECT_EQ(out.excluded_multibias.front().post.post_id, "multi");

  std::vector<corpus::ScoredPost> neutral;
  for (int i = 0; i < 10; ++i) neutral.push_back(post(std::to_string(i), "spring collection"));
  auto clean = assign_bias_labels(neutral, lexicons);
  EXPECT_EQ(clean.unbiased.size(), 10u);
  EXPECT_TRUE(clean.biased.empty());
  EXPECT_TRUE(clean.excluded_multibias.empty());
}

TEST(AssignBiasLabels, DetectorHookAndPartition) {
  struct EveryThirdIsAnimal : VisualBiasDetector {
    std::set<BiasKind> detect(const corpus::PostRecord& p) const override {
      if (std::stoi(p.post_id) % 3 == 0) return {BiasKind::AnimalPresence};
      return {};
    }
  } detector;
  const std::vector<Lexicon> lexicons = {discount_lexicon(), holiday_lexicon()};
  std::vector<corpus::ScoredPost> posts;
  std::mt19937 rng(8);
  for (int i = 0; i < 300; ++i) {
    std::set<BiasKind> labels;
    if (rng() % 5 == 0) labels.insert(BiasKind::HumanPresence);
    posts.push_back(post(std::to_string(i), rng() % 4 == 0 ? "free gift" : "hello", labels));
  }
  const VisualBiasDetector* dets[] = {&detector};
  auto out = assign_bias_labels(posts, lexicons, dets);
  std::set<std::string> seen;
  std::size_t total = out.unbiased.size() + out.excluded_multibias.size();
  for (auto& p : out.unbiased) seen.insert(p.post.post_id);
  for (auto& p : out.excluded_multibias) seen.insert(p.post.post_id);
  for (auto& [kind, list] : out.biased) {
    total += list.size();
    for (auto& p : list) seen.insert(p.post.post_id);
  }
  EXPECT_EQ(total, posts.size());
  EXPECT_EQ(seen.size(), posts.size());
  EXPECT_TRUE(out.biased.contains(BiasKind::AnimalPresence));
}
