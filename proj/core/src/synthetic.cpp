#include "adlens/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "adlens/aesthetics/features.hpp"
#include "adlens/corpus.hpp"
#include "adlens/error.hpp"

namespace adlens::synthetic {

namespace {

using aesthetics::Hsv;
using aesthetics::Rgb;

cv::Scalar to_scalar(double h, double s, double v) {
  const Rgb c = aesthetics::hsv_to_rgb({std::fmod(h + 360.0, 360.0), s, v});
  return {c.r, c.g, c.b};
}

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

struct Vocabulary {
  std::vector<std::string> words;
  int cluster = 0;
};

const std::vector<Vocabulary>& vocabulary() {
  static const std::vector<Vocabulary> v{
      {{"sale", "discount", "clearance", "deal", "offer", "bargain"}, 0},
      {{"holidays", "christmas", "merry", "festive", "xmas", "season"}, 1},
      {{"new", "collection", "check", "out", "our", "fresh", "looks", "style", "team", "today",
        "meet", "friends", "family", "love", "this", "week", "weekend", "design", "made", "with",
        "care", "shop", "the", "look", "for", "you"},
       2}};
  return v;
}

const std::vector<std::string> kNeutralTexts{
    "Check out our new collection", "Fresh looks for the weekend", "Meet the team",
    "Made with care for you",       "New style this week",         "Love this design"};
const std::vector<std::string> kDiscountTexts{
    "Big sale on the new collection", "Clearance this weekend", "Our best deal this week",
    "Discount for friends and family"};
const std::vector<std::string> kHolidayTexts{
    "Merry christmas from our team", "Happy holidays to you and your family",
    "Festive looks for the season"};

void write_embeddings(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  constexpr int kDim = 6;
  for (const auto& group : vocabulary()) {
    for (std::size_t w = 0; w < group.words.size(); ++w) {
      out << group.words[w];
      for (int d = 0; d < kDim; ++d) {
        double v = d == group.cluster ? 1.0 : 0.0;
        v += 0.05 * std::sin(1.7 * static_cast<double>(w + 1) * (d + 1) + group.cluster);
        out << ' ' << v;
      }
      out << '\n';
    }
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

corpus::Timestamp day(int year, unsigned month, unsigned d, int seconds) {
  using namespace std::chrono;
  const sys_days date = year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                       std::chrono::day{d}};
  return time_point_cast<std::chrono::seconds>(date) + std::chrono::seconds{seconds};
}

}  // namespace

ImageRecipe random_recipe(std::mt19937_64& rng) {
  ImageRecipe r;
  const double aspect = std::exp(uniform(rng, std::log(0.6), std::log(1.8)));
  const double side = uniform(rng, 96.0, 192.0);
  if (aspect >= 1.0) {
    r.width = static_cast<int>(std::lround(side));
    r.height = std::max(32, static_cast<int>(std::lround(side / aspect)));
  } else {
    r.height = static_cast<int>(std::lround(side));
    r.width = std::max(32, static_cast<int>(std::lround(side * aspect)));
  }
  r.hue = uniform(rng, 0.0, 360.0);
  r.saturation = uniform(rng, 0.05, 0.95);
  r.value = uniform(rng, 0.15, 0.95);
  const int n = 1 + static_cast<int>(unit(rng) * 5.0);
  for (int i = 0; i < n; ++i) {
    Shape s;
    s.ellipse = unit(rng) < 0.5;
    s.cx = uniform(rng, 0.15, 0.85);
    s.cy = uniform(rng, 0.15, 0.85);
    s.rx = uniform(rng, 0.05, 0.3);
    s.ry = uniform(rng, 0.05, 0.3);
    s.hue = r.hue + uniform(rng, -90.0, 90.0);
    s.saturation = std::clamp(r.saturation + uniform(rng, -0.3, 0.3), 0.0, 1.0);
    s.value = std::clamp(r.value + uniform(rng, -0.35, 0.35), 0.0, 1.0);
    r.shapes.push_back(s);
  }
  r.blur_sigma = unit(rng) < 0.3 ? 0.0 : uniform(rng, 0.3, 3.0);
  r.noise = uniform(rng, 0.0, 0.04);
  r.noise_seed = rng();
  return r;
}

aesthetics::ImageBuffer render(const ImageRecipe& recipe) {
  if (recipe.width < 8 || recipe.height < 8)
    throw Error(Errc::TooSmall, "synthetic images need at least 8 pixels per side");
  cv::Mat img(recipe.height, recipe.width, CV_64FC3, to_scalar(recipe.hue, recipe.saturation, recipe.value));
  const double w = recipe.width, h = recipe.height;
  for (const auto& s : recipe.shapes) {
    const cv::Point centre(static_cast<int>(s.cx * w), static_cast<int>(s.cy * h));
    const cv::Size axes(std::max(1, static_cast<int>(s.rx * w)), std::max(1, static_cast<int>(s.ry * h)));
    const auto colour = to_scalar(s.hue, s.saturation, s.value);
    if (s.ellipse) {
      cv::ellipse(img, centre, axes, 0.0, 0.0, 360.0, colour, cv::FILLED, cv::LINE_8);
    } else {
      cv::rectangle(img, centre - cv::Point(axes.width, axes.height),
                    centre + cv::Point(axes.width, axes.height), colour, cv::FILLED, cv::LINE_8);
    }
  }
  if (recipe.blur_sigma > 0.0) cv::GaussianBlur(img, img, cv::Size(0, 0), recipe.blur_sigma);
  std::mt19937_64 rng(recipe.noise_seed);
  std::uniform_real_distribution<double> jitter(-recipe.noise, recipe.noise);
  std::vector<Rgb> rgb(static_cast<std::size_t>(recipe.width) * recipe.height);
  for (int y = 0; y < recipe.height; ++y) {
    for (int x = 0; x < recipe.width; ++x) {
      const auto& p = img.at<cv::Vec3d>(y, x);
      auto& out = rgb[static_cast<std::size_t>(y) * recipe.width + x];
      out.r = std::clamp(p[0] + (recipe.noise > 0.0 ? jitter(rng) : 0.0), 0.0, 1.0);
      out.g = std::clamp(p[1] + (recipe.noise > 0.0 ? jitter(rng) : 0.0), 0.0, 1.0);
      out.b = std::clamp(p[2] + (recipe.noise > 0.0 ? jitter(rng) : 0.0), 0.0, 1.0);
    }
  }
  return aesthetics::make_image(recipe.width, recipe.height, std::move(rgb));
}

SyntheticCorpus generate_corpus(const std::filesystem::path& dir, const CorpusOptions& opts) {
  if (opts.planted_features.size() != opts.planted_weights.size())
    throw Error(Errc::ConfigError, "planted features and weights differ in length");
  if (opts.pages == 0 || opts.posts < 2 * opts.pages)
    throw Error(Errc::ConfigError, "synthetic corpus needs at least two posts per page");
  std::filesystem::create_directories(dir / "images");
  std::mt19937_64 rng(opts.seed);

  const auto registry = aesthetics::FeatureRegistry::standard();
  std::vector<std::size_t> planted_idx;
  for (const auto& id : opts.planted_features) {
    const auto idx = registry.index_of(id);
    if (!idx) throw Error(Errc::UnknownFeature, "unknown planted feature: " + id);
    planted_idx.push_back(*idx);
  }

  const std::size_t n = opts.posts;
  std::vector<std::string> image_names(n);
  std::vector<std::vector<double>> planted(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto png = aesthetics::encode_png(render(random_recipe(rng)));
    char name[32];
    std::snprintf(name, sizeof name, "img%05zu.png", i);
    image_names[i] = std::string("images/") + name;
    {
      std::ofstream out(dir / image_names[i], std::ios::binary);
      if (!out) throw Error(Errc::IoError, "cannot write " + (dir / image_names[i]).string());
      out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    }
    // Score what the pipeline will see: the decoded PNG.
    const auto fv = aesthetics::extract_features(aesthetics::decode_image(png), registry);
    for (std::size_t idx : planted_idx) planted[i].push_back(fv.values[idx]);
  }

  std::vector<double> score(n, 0.0);
  for (std::size_t f = 0; f < planted_idx.size(); ++f) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += planted[i][f];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (planted[i][f] - mean) * (planted[i][f] - mean);
    const double sd = std::max(std::sqrt(sq / static_cast<double>(n)), 1e-12);
    for (std::size_t i = 0; i < n; ++i) score[i] += opts.planted_weights[f] * (planted[i][f] - mean) / sd;
  }
  {
    const double mean = std::accumulate(score.begin(), score.end(), 0.0) / static_cast<double>(n);
    double sq = 0.0;
    for (double s : score) sq += (s - mean) * (s - mean);
    const double sd = std::max(std::sqrt(sq / static_cast<double>(n)), 1e-12);
    for (double& s : score) s = (s - mean) / sd;
  }

  std::vector<std::optional<BiasKind>> bias(n);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_biased = static_cast<std::size_t>(std::lround(opts.bias_fraction * static_cast<double>(n)));
    if (!opts.kinds.empty())
      for (std::size_t j = 0; j < std::min(n_biased, n); ++j) bias[order[j]] = opts.kinds[j % opts.kinds.size()];
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  SyntheticCorpus out;
  out.planted_features = opts.planted_features;
  std::vector<corpus::PostRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t page = i % opts.pages;
    const double base = 500.0 + 250.0 * static_cast<double>(page);
    const double scale = 60.0 + 20.0 * static_cast<double>(page);
    double z = score[i] + opts.noise * noise(rng);
    if (bias[i]) {
      const auto it = opts.boosts.find(*bias[i]);
      if (it != opts.boosts.end()) z += it->second;
    }
    const auto eps = static_cast<std::uint64_t>(std::max(0.0, std::round(base + scale * z)));

    corpus::PostRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "p%05zu", i);
    r.post_id = id;
    r.page_id = "page" + std::to_string(page);
    r.image_path = image_names[i];
    r.likes = eps * 3 / 4;
    r.retweets = eps - r.likes;
    r.followers = 1000 * (page + 1) * (page + 2);
    const auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
    const int secs = static_cast<int>(rng() % 86400);
    if (bias[i] == BiasKind::Holiday) {
      r.timestamp = day(2023, 12, 20 + static_cast<unsigned>(rng() % 9), secs);
      r.text = pick(kHolidayTexts);
    } else {
      // Some neutral posts fall inside the holiday window without holiday words.
      r.timestamp = rng() % 10 == 0 ? day(2023, 12, 18 + static_cast<unsigned>(rng() % 12), secs)
                                    : day(2023, 3 + static_cast<unsigned>(rng() % 8),
                                          1 + static_cast<unsigned>(rng() % 28), secs);
      r.text = bias[i] == BiasKind::Discount ? pick(kDiscountTexts) : pick(kNeutralTexts);
    }
    if (bias[i] == BiasKind::HumanPresence || bias[i] == BiasKind::AnimalPresence)
      r.external_bias_labels.insert(*bias[i]);
    records.push_back(std::move(r));
    out.posts.push_back({id, score[i], bias[i]});
  }

  out.corpus = dir / "corpus.csv";
  corpus::write_corpus(out.corpus, records, corpus::Format::Csv);
  out.embeddings = dir / "embeddings.txt";
  write_embeddings(out.embeddings);
  out.lexicons = {dir / "lexicon_discount.json", dir / "lexicon_holiday.json"};
  write_json(out.lexicons[0], {{"kind", "discount"}, {"seeds", {"sale", "discount"}}, {"stoplist", nlohmann::json::array()}});
  write_json(out.lexicons[1],
             {{"kind", "holiday"},
              {"seeds", {"holidays", "christmas"}},
              {"stoplist", nlohmann::json::array()},
              {"holidays", {{{"name", "christmas"}, {"date", "12-25"}, {"pre_days", 7}, {"post_days", 7}}}}});
  return out;
}

}  // namespace adlens::synthetic
