#include "adlens/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "adlens/error.hpp"
#include "adlens/stats.hpp"
#include "csv.hpp"

namespace adlens {

std::string_view to_string(BiasKind kind) {
  switch (kind) {
    case BiasKind::HumanPresence: return "human_presence";
    case BiasKind::AnimalPresence: return "animal_presence";
    case BiasKind::Holiday: return "holiday";
    case BiasKind::Discount: return "discount";
  }
  return "unknown";
}

std::optional<BiasKind> parse_bias_kind(std::string_view name) {
  std::string folded;
  for (char c : name) {
    if (c == '_' || c == '-' || c == ' ') continue;
    folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (folded == "humanpresence" || folded == "human") return BiasKind::HumanPresence;
  if (folded == "animalpresence" || folded == "animal") return BiasKind::AnimalPresence;
  if (folded == "holiday") return BiasKind::Holiday;
  if (folded == "discount") return BiasKind::Discount;
  return std::nullopt;
}

}  // namespace adlens

namespace adlens::corpus {

using nlohmann::json;

namespace {

using detail::csv_quote;
using detail::read_csv;

const std::vector<std::string> kRequiredFields = {"post_id", "page_id", "image",    "likes",
                                                  "retweets", "timestamp", "text"};

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// Parses a decimal count into a non-negative integer; returns a reason on failure.
std::optional<std::string> parse_count(std::string_view raw, std::uint64_t& out) {
  std::string s(raw);
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if (s.empty()) return "empty value";
  if (s[0] == '-') return "negative value";
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) return "not a non-negative integer";
  return std::nullopt;
}

std::optional<std::string> parse_labels(const std::vector<std::string>& names,
                                        std::set<BiasKind>& out) {
  for (const auto& raw : names) {
    if (raw.empty()) continue;
    auto kind = parse_bias_kind(raw);
    if (!kind) return "unknown bias label '" + raw + "'";
    out.insert(*kind);
  }
  return std::nullopt;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

// Shared row validation: JSON and CSV both funnel into these string-keyed values.
struct RawRow {
  std::unordered_map<std::string, std::string> strings;
  std::vector<std::string> labels;
  std::optional<std::string> followers;
};

std::optional<std::string> build_record(const RawRow& raw, PostRecord& rec) {
  for (const auto& f : kRequiredFields)
    if (!raw.strings.contains(f)) return "missing required field '" + f + "'";
  rec.post_id = raw.strings.at("post_id");
  rec.page_id = raw.strings.at("page_id");
  rec.image_path = raw.strings.at("image");
  rec.text = raw.strings.at("text");
  if (rec.post_id.empty()) return "empty post_id";
  if (auto err = parse_count(raw.strings.at("likes"), rec.likes)) return "likes: " + *err;
  if (auto err = parse_count(raw.strings.at("retweets"), rec.retweets))
    return "retweets: " + *err;
  auto ts = parse_rfc3339(raw.strings.at("timestamp"));
  if (!ts) return "timestamp is not RFC 3339";
  rec.timestamp = *ts;
  if (auto err = parse_labels(raw.labels, rec.external_bias_labels)) return *err;
  if (raw.followers && !raw.followers->empty()) {
    std::uint64_t f = 0;
    if (auto err = parse_count(*raw.followers, f)) return "followers: " + *err;
    rec.followers = f;
  }
  return std::nullopt;
}

std::optional<std::string> raw_from_json(const json& j, RawRow& raw) {
  if (!j.is_object()) return "line is not a JSON object";
  for (const auto& f : kRequiredFields) {
    if (!j.contains(f)) continue;
    const auto& v = j.at(f);
    if (f == "likes" || f == "retweets") {
      if (v.is_number_unsigned()) raw.strings[f] = std::to_string(v.get<std::uint64_t>());
      else if (v.is_number_integer()) raw.strings[f] = std::to_string(v.get<std::int64_t>());
      else return f + " must be an integer";
    } else {
      if (!v.is_string()) return f + " must be a string";
      raw.strings[f] = v.get<std::string>();
    }
  }
  if (j.contains("bias_labels")) {
    const auto& v = j.at("bias_labels");
    if (!v.is_array()) return "bias_labels must be an array";
    for (const auto& e : v) {
      if (!e.is_string()) return "bias_labels entries must be strings";
      raw.labels.push_back(e.get<std::string>());
    }
  }
  if (j.contains("followers") && !j.at("followers").is_null()) {
    const auto& v = j.at("followers");
    if (v.is_number_unsigned()) raw.followers = std::to_string(v.get<std::uint64_t>());
    else if (v.is_number_integer()) raw.followers = std::to_string(v.get<std::int64_t>());
    else return "followers must be an integer";
  }
  return std::nullopt;
}

json record_to_json(const PostRecord& r) {
  json j = {{"post_id", r.post_id}, {"page_id", r.page_id},
            {"image", r.image_path}, {"likes", r.likes},
            {"retweets", r.retweets}, {"timestamp", format_rfc3339(r.timestamp)},
            {"text", r.text}};
  if (!r.external_bias_labels.empty()) {
    json labels = json::array();
    for (auto k : r.external_bias_labels) labels.push_back(std::string(to_string(k)));
    j["bias_labels"] = labels;
  }
  if (r.followers) j["followers"] = *r.followers;
  return j;
}

}  // namespace

std::optional<Format> parse_format(std::string_view name) {
  if (name == "csv") return Format::Csv;
  if (name == "jsonl" || name == "jsonlines" || name == "json-lines") return Format::JsonLines;
  return std::nullopt;
}

std::optional<Timestamp> parse_rfc3339(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
  if (s.size() < 20) return std::nullopt;
  int y, mo, d, h, mi, sec;
  if (s[4] != '-' || s[7] != '-' || s[13] != ':' || s[16] != ':') return std::nullopt;
  if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return std::nullopt;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), h) ||
      !parse_int(s.substr(14, 2), mi) || !parse_int(s.substr(17, 2), sec))
    return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  int offset_minutes = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    if (s.size() - pos != 6 || s[pos + 3] != ':') return std::nullopt;
    int oh, om;
    if (!parse_int(s.substr(pos + 1, 2), oh) || !parse_int(s.substr(pos + 4, 2), om))
      return std::nullopt;
    offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

std::string format_rfc3339(Timestamp ts) {
  using namespace std::chrono;
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{ts - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

double compute_engagement(std::uint64_t likes, std::uint64_t retweets) {
  return static_cast<double>(likes) + static_cast<double>(retweets);
}

std::pair<PageStats, std::vector<double>> normalize_page(std::span<const double> scores) {
  if (scores.size() < 2)
    throw Error(Errc::DegeneratePage, "page has fewer than 2 posts");
  PageStats page;
  page.n_posts = scores.size();
  page.mu = stats::mean(scores);
  page.sigma = stats::stddev(scores);
  if (!(page.sigma > 0.0)) throw Error(Errc::DegeneratePage, "page scores have zero variance");
  std::vector<double> z(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) z[i] = (scores[i] - page.mu) / page.sigma;
  return {page, z};
}

LoadResult load_corpus(const std::filesystem::path& path, Format format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open corpus file " + path.string());

  LoadResult result;
  std::unordered_set<std::string> seen_ids;
  auto admit = [&](std::size_t line, const RawRow& raw) {
    PostRecord rec;
    if (auto err = build_record(raw, rec)) {
      result.rejects.push_back({line, *err});
      return;
    }
    if (!seen_ids.insert(rec.post_id).second) {
      result.rejects.push_back({line, "duplicate post_id '" + rec.post_id + "'"});
      return;
    }
    result.records.push_back(std::move(rec));
  };

  if (format == Format::JsonLines) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      RawRow raw;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        result.rejects.push_back({line_no, "invalid JSON"});
        continue;
      }
      if (auto err = raw_from_json(j, raw)) {
        result.rejects.push_back({line_no, *err});
        continue;
      }
      admit(line_no, raw);
    }
    return result;
  }

  auto rows = read_csv(in);
  if (rows.empty()) throw Error(Errc::SchemaError, "CSV file has no header row");
  const auto& header = rows.front().fields;
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const auto& f : kRequiredFields)
    if (!column.contains(f)) throw Error(Errc::SchemaError, "CSV header lacks column '" + f + "'");

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      result.rejects.push_back({row.line, "expected " + std::to_string(header.size()) +
                                              " fields, found " +
                                              std::to_string(row.fields.size())});
      continue;
    }
    RawRow raw;
    for (const auto& f : kRequiredFields) {
      const auto& v = row.fields[column.at(f)];
      // An empty numeric cell counts as a missing value.
      if ((f == "likes" || f == "retweets") && v.empty()) continue;
      raw.strings[f] = v;
    }
    if (auto it = column.find("bias_labels"); it != column.end())
      raw.labels = split(row.fields[it->second], ';');
    if (auto it = column.find("followers"); it != column.end()) raw.followers = row.fields[it->second];
    admit(row.line, raw);
  }
  return result;
}

void write_corpus(const std::filesystem::path& path, std::span<const PostRecord> records,
                  Format format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  if (format == Format::JsonLines) {
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    return;
  }
  out << "post_id,page_id,image,likes,retweets,timestamp,text,bias_labels,followers\n";
  for (const auto& r : records) {
    std::string labels;
    for (auto k : r.external_bias_labels) {
      if (!labels.empty()) labels.push_back(';');
      labels += to_string(k);
    }
    out << csv_quote(r.post_id) << ',' << csv_quote(r.page_id) << ',' << csv_quote(r.image_path)
        << ',' << r.likes << ',' << r.retweets << ',' << format_rfc3339(r.timestamp) << ','
        << csv_quote(r.text) << ',' << csv_quote(labels) << ','
        << (r.followers ? std::to_string(*r.followers) : std::string()) << '\n';
  }
}

void write_rejects(const std::filesystem::path& path, std::span<const Reject> rejects) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : rejects) out << json{{"line", r.line}, {"reason", r.reason}}.dump() << '\n';
}

ScoringResult score_corpus(std::span<const PostRecord> records) {
  // Pages keep first-appearance order so outputs are deterministic.
  std::vector<std::string> page_order;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = members.try_emplace(records[i].page_id);
    if (inserted) page_order.push_back(records[i].page_id);
    it->second.push_back(i);
  }

  ScoringResult result;
  std::vector<std::optional<ScoredPost>> slots(records.size());
  for (const auto& page_id : page_order) {
    const auto& idx = members.at(page_id);
    std::vector<double> eps;
    eps.reserve(idx.size());
    for (auto i : idx) eps.push_back(compute_engagement(records[i].likes, records[i].retweets));
    try {
      auto [stats, z] = normalize_page(eps);
      stats.page_id = page_id;
      for (auto i : idx)
        if (records[i].followers) stats.followers = records[i].followers;
      for (std::size_t k = 0; k < idx.size(); ++k)
        slots[idx[k]] = ScoredPost{records[idx[k]], eps[k], z[k], std::nullopt};
      result.pages.push_back(std::move(stats));
    } catch (const Error& e) {
      std::cerr << "warning: excluding page '" << page_id << "': " << e.what() << '\n';
      result.excluded_pages.push_back(page_id);
    }
  }
  for (auto& s : slots)
    if (s) result.posts.push_back(std::move(*s));
  return result;
}

CorrelationReport page_correlation_report(std::span<const PageSample> pages) {
  if (pages.size() < 3)
    throw Error(Errc::InsufficientData, "correlation report needs at least 3 pages");
  CorrelationReport report;
  std::vector<double> followers, means;
  for (const auto& p : pages) {
    if (p.scores.empty())
      throw Error(Errc::InsufficientData, "page '" + p.page_id + "' has no scores");
    PageSummaryRow row;
    row.page_id = p.page_id;
    row.followers = p.followers;
    row.mean = stats::mean(p.scores);
    row.median = stats::median(p.scores);
    row.variance = stats::variance(p.scores);
    followers.push_back(p.followers);
    means.push_back(row.mean);
    report.pages.push_back(std::move(row));
  }
  report.pearson = stats::pearson(followers, means);
  report.spearman = stats::spearman(followers, means);
  return report;
}

}  // namespace adlens::corpus
