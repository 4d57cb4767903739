#include "adlens/biasdetect.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "adlens/error.hpp"

namespace adlens::bias {

namespace {

double distance(const Point& a, const Point& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<double> lof_raw(std::span<const Point> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0 || k >= n)
    throw Error(Errc::BadK, "k must satisfy 1 <= k < n (k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) + ")");
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw Error(Errc::DimensionMismatch, "LOF points differ in dimension");

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = distance(points[i], points[j]);

  std::vector<double> k_distance(n);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(dist[i * n + j]);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    k_distance[i] = row[k - 1];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && dist[i * n + j] <= k_distance[i]) neighbors[i].push_back(j);
  }

  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double reach = 0.0;
    for (auto o : neighbors[i]) reach += std::max(k_distance[o], dist[i * n + o]);
    reach /= static_cast<double>(neighbors[i].size());
    lrd[i] = 1.0 / std::max(reach, kLofEpsilon);
  }

  std::vector<double> lof(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (auto o : neighbors[i]) acc += lrd[o];
    lof[i] = acc / (static_cast<double>(neighbors[i].size()) * lrd[i]);
  }
  return lof;
}

std::vector<double> lof_scores(std::span<const Point> points, std::size_t k) {
  auto raw = lof_raw(points, k);
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo, span = *hi - *lo;
  for (auto& v : raw) v = span > 0.0 ? (v - min) / span : 0.0;
  return raw;
}

EmbeddingLoad load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open embedding file " + path.string());
  EmbeddingLoad result;
  auto& table = result.table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view rest(line);
    auto next_token = [&]() -> std::string_view {
      const auto start = rest.find_first_not_of(' ');
      if (start == std::string_view::npos) {
        rest = {};
        return {};
      }
      rest.remove_prefix(start);
      const auto end = std::min(rest.find(' '), rest.size());
      auto tok = rest.substr(0, end);
      rest.remove_prefix(end);
      return tok;
    };
    const std::string word(next_token());
    if (word.empty()) continue;
    std::vector<double> vec;
    for (auto tok = next_token(); !tok.empty(); tok = next_token()) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size())
        throw Error(Errc::IoError, "line " + std::to_string(line_no) + ": bad number '" +
                                       std::string(tok) + "'");
      vec.push_back(v);
    }
    if (vec.empty())
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(line_no) + " has no vector");
    if (table.dimension == 0) table.dimension = vec.size();
    if (vec.size() != table.dimension)
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(line_no) + " has dimension " +
                                               std::to_string(vec.size()) + ", expected " +
                                               std::to_string(table.dimension));
    auto [it, inserted] = table.entries.insert_or_assign(word, std::move(vec));
    if (!inserted) result.warnings.push_back("duplicate word '" + word + "' on line " +
                                             std::to_string(line_no) + "; keeping last");
  }
  if (table.entries.empty()) throw Error(Errc::InsufficientData, "embedding file is empty");
  return result;
}

Expansion expand_keywords(std::span<const std::string> seeds, const EmbeddingTable& table,
                          std::size_t m, std::span<const std::string> stoplist) {
  Expansion out;
  std::unordered_set<std::string> seen;
  std::vector<std::string> present;
  for (const auto& raw : seeds) {
    auto seed = lowercase(raw);
    if (seen.insert(seed).second) out.words.push_back(seed);
    if (table.entries.contains(seed)) present.push_back(seed);
    else out.missing_seeds.push_back(seed);
  }
  if (present.empty()) throw Error(Errc::NoSeedInVocabulary, "no seed word is in the vocabulary");
  if (m == 0) return out;

  std::unordered_set<std::string> stop;
  for (const auto& s : stoplist) stop.insert(lowercase(s));

  auto norm = [](const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };
  struct Candidate {
    double cosine;
    const std::string* word;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(table.entries.size());
  for (const auto& seed : present) {
    const auto& sv = table.entries.at(seed);
    const double sn = norm(sv);
    candidates.clear();
    for (const auto& [word, vec] : table.entries) {
      if (word == seed) continue;
      const double denom = sn * norm(vec);
      const double cos =
          denom > 0.0 ? std::inner_product(sv.begin(), sv.end(), vec.begin(), 0.0) / denom : 0.0;
      candidates.push_back({cos, &word});
    }
    const auto take = std::min(m, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.cosine != b.cosine) return a.cosine > b.cosine;
                        return *a.word < *b.word;
                      });
    for (std::size_t i = 0; i < take; ++i) {
      auto word = lowercase(*candidates[i].word);
      if (stop.contains(word)) continue;
      if (seen.insert(word).second) out.words.push_back(std::move(word));
    }
  }
  return out;
}

bool HolidayWindow::contains(corpus::Timestamp ts) const {
  using namespace std::chrono;
  const auto date = floor<days>(ts);
  const int y = static_cast<int>(year_month_day{date}.year());
  for (int yy = y - 1; yy <= y + 1; ++yy) {
    const year_month_day hd{year{yy}, std::chrono::month{month}, std::chrono::day{day}};
    if (!hd.ok()) continue;
    const sys_days center{hd};
    if (date >= center - days{pre_days} && date <= center + days{post_days}) return true;
  }
  return false;
}

Lexicon parse_lexicon(std::string_view json_text) {
  using nlohmann::json;
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::ConfigError, "lexicon is not a JSON object");
  Lexicon lex;
  try {
    auto kind = parse_bias_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(Errc::ConfigError, "unknown lexicon kind");
    lex.kind = *kind;
    for (const auto& s : j.at("seeds")) lex.seed_words.push_back(lowercase(s.get<std::string>()));
    if (j.contains("stoplist"))
      for (const auto& s : j.at("stoplist")) lex.stoplist.push_back(lowercase(s.get<std::string>()));
    if (j.contains("holidays")) {
      for (const auto& h : j.at("holidays")) {
        HolidayWindow w;
        w.name = h.value("name", "");
        const auto date = h.at("date").get<std::string>();
        unsigned mo = 0, d = 0;
        if (date.size() != 5 || date[2] != '-' ||
            std::sscanf(date.c_str(), "%2u-%2u", &mo, &d) != 2 || mo < 1 || mo > 12 || d < 1 ||
            d > 31)
          throw Error(Errc::ConfigError, "holiday date must be MM-DD, got '" + date + "'");
        w.month = mo;
        w.day = d;
        w.pre_days = h.value("pre_days", 7);
        w.post_days = h.value("post_days", 7);
        if (w.pre_days < 0 || w.post_days < 0)
          throw Error(Errc::ConfigError, "holiday window days must be non-negative");
        lex.holiday_windows.push_back(std::move(w));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("lexicon: ") + e.what());
  }
  lex.expanded_words = lex.seed_words;
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open lexicon " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_lexicon(ss.str());
}

void expand_lexicon(Lexicon& lexicon, const EmbeddingTable& table, std::size_t m) {
  lexicon.expanded_words = expand_keywords(lexicon.seed_words, table, m, lexicon.stoplist).words;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::set<BiasKind> classify_text_bias(std::string_view text, corpus::Timestamp timestamp,
                                      std::span<const Lexicon> lexicons) {
  std::set<BiasKind> out;
  const auto tokens = tokenize(text);
  const std::unordered_set<std::string> token_set(tokens.begin(), tokens.end());
  auto matches = [&](const Lexicon& lex) {
    return std::any_of(lex.expanded_words.begin(), lex.expanded_words.end(),
                       [&](const std::string& w) { return token_set.contains(w); });
  };
  for (const auto& lex : lexicons) {
    if (lex.kind == BiasKind::Discount) {
      if (matches(lex)) out.insert(BiasKind::Discount);
    } else if (lex.kind == BiasKind::Holiday) {
      const bool in_window =
          std::any_of(lex.holiday_windows.begin(), lex.holiday_windows.end(),
                      [&](const HolidayWindow& w) { return w.contains(timestamp); });
      if (in_window && matches(lex)) out.insert(BiasKind::Holiday);
    }
  }
  return out;
}

LabeledCorpus assign_bias_labels(std::span<const corpus::ScoredPost> posts,
                                 std::span<const Lexicon> lexicons,
                                 std::span<const VisualBiasDetector* const> detectors) {
  LabeledCorpus out;
  for (const auto& sp : posts) {
    auto labels = sp.post.external_bias_labels;
    for (const auto* det : detectors) {
      auto found = det->detect(sp.post);
      labels.insert(found.begin(), found.end());
    }
    auto text_labels = classify_text_bias(sp.post.text, sp.post.timestamp, lexicons);
    labels.insert(text_labels.begin(), text_labels.end());
    if (labels.empty()) out.unbiased.push_back(sp);
    else if (labels.size() == 1) out.biased[*labels.begin()].push_back(sp);
    else out.excluded_multibias.push_back(sp);
  }
  return out;
}

}  // namespace adlens::bias
