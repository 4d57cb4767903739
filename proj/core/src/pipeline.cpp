#include "adlens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "adlens/debias.hpp"
#include "csv.hpp"

namespace adlens::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::csv_quote;
using detail::format_double;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "missing artifact " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::SchemaError, "malformed JSON in " + path.string());
  return j;
}

// Rows after a header that must equal `expected`.
std::vector<std::vector<std::string>> read_table(const fs::path& path,
                                                 const std::vector<std::string>& expected) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "missing artifact " + path.string());
  auto rows = detail::read_csv(in);
  if (rows.empty() || rows.front().fields != expected)
    throw Error(Errc::SchemaError, "unexpected header in " + path.string());
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].fields.size() != expected.size())
      throw Error(Errc::SchemaError, path.string() + ": wrong field count on line " +
                                         std::to_string(rows[i].line));
    out.push_back(std::move(rows[i].fields));
  }
  return out;
}

double to_double(const std::string& s, const fs::path& where) {
  double v = 0.0;
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  if (!(in >> v)) throw Error(Errc::SchemaError, "bad number '" + s + "' in " + where.string());
  return v;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("config key '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string relative_or_absolute(const fs::path& p) { return p.lexically_normal().string(); }

// Fisher-Yates with the raw engine output, identical on every platform.
void shuffle(std::vector<std::string>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

struct ScoreRow {
  std::string post_id, page_id, image;
  double epsilon = 0.0, epsilon_n = 0.0;
};

std::vector<ScoreRow> read_scores(const ArtifactStore& store) {
  std::vector<ScoreRow> out;
  for (auto& r : read_table(store.scores(), {"post_id", "page_id", "image", "epsilon", "epsilon_n"}))
    out.push_back({r[0], r[1], r[2], to_double(r[3], store.scores()), to_double(r[4], store.scores())});
  return out;
}

struct TargetRow {
  std::string post_id, bias;
  double epsilon_n = 0.0, epsilon_nt = 0.0;
};

std::vector<TargetRow> read_targets(const ArtifactStore& store) {
  std::vector<TargetRow> out;
  for (auto& r : read_table(store.targets(), {"post_id", "bias", "epsilon_n", "epsilon_nt"}))
    out.push_back({r[0], r[1], to_double(r[2], store.targets()), to_double(r[3], store.targets())});
  return out;
}

// ---------------------------------------------------------------------------

void stage_ingest(const PipelineConfig& c, const ArtifactStore& store) {
  const auto load = corpus::load_corpus(c.corpus, c.format);
  fs::create_directories(store.rejects().parent_path());
  corpus::write_rejects(store.rejects(), load.rejects);
  const auto scoring = corpus::score_corpus(load.records);

  std::vector<bias::Lexicon> lexicons;
  for (const auto& p : c.lexicons) lexicons.push_back(bias::load_lexicon(p));
  if (c.embeddings) {
    const auto emb = bias::load_embeddings(*c.embeddings);
    for (auto& lex : lexicons) bias::expand_lexicon(lex, emb.table, c.expansion_m);
  }
  for (auto& lex : lexicons)
    if (lex.kind == BiasKind::Holiday)
      lex.holiday_windows.insert(lex.holiday_windows.end(), c.holidays.begin(), c.holidays.end());
  const auto labeled = bias::assign_bias_labels(scoring.posts, lexicons);

  std::map<std::string, std::string> label_of;
  for (const auto& sp : labeled.unbiased) label_of[sp.post.post_id] = "none";
  for (const auto& [kind, posts] : labeled.biased)
    for (const auto& sp : posts) label_of[sp.post.post_id] = std::string(to_string(kind));
  for (const auto& sp : labeled.excluded_multibias) label_of[sp.post.post_id] = "multi";

  std::string scores = "post_id,page_id,image,epsilon,epsilon_n\n";
  std::string labels = "post_id,bias\n";
  for (const auto& sp : scoring.posts) {
    scores += csv_quote(sp.post.post_id) + ',' + csv_quote(sp.post.page_id) + ',' +
              csv_quote(sp.post.image_path) + ',' + format_double(sp.epsilon) + ',' +
              format_double(sp.epsilon_n) + '\n';
    labels += csv_quote(sp.post.post_id) + ',' + label_of.at(sp.post.post_id) + '\n';
  }
  write_text(store.scores(), scores);
  write_text(store.labels(), labels);

  json pages = json::array();
  for (const auto& p : scoring.pages) {
    json e{{"page_id", p.page_id}, {"mu", p.mu}, {"sigma", p.sigma}, {"n_posts", p.n_posts}};
    if (p.followers) e["followers"] = *p.followers;
    pages.push_back(e);
  }
  write_json(store.pages(), {{"pages", pages}, {"excluded_pages", scoring.excluded_pages}});

  json lex = json::array();
  for (const auto& l : lexicons)
    lex.push_back({{"kind", to_string(l.kind)}, {"seeds", l.seed_words}, {"expanded", l.expanded_words}});
  write_json(store.lexicons(), lex);

  json biased = json::object();
  for (const auto& [kind, posts] : labeled.biased) biased[std::string(to_string(kind))] = posts.size();
  write_json(store.ingest_summary(), {{"records", load.records.size()},
                                      {"rejects", load.rejects.size()},
                                      {"pages", scoring.pages.size()},
                                      {"excluded_pages", scoring.excluded_pages.size()},
                                      {"scored_posts", scoring.posts.size()},
                                      {"unbiased", labeled.unbiased.size()},
                                      {"biased", biased},
                                      {"multibias", labeled.excluded_multibias.size()}});
}

void stage_debias(const PipelineConfig& c, const ArtifactStore& store) {
  const auto scores = read_scores(store);
  std::map<std::string, std::string> label_of;
  for (auto& r : read_table(store.labels(), {"post_id", "bias"})) label_of[r[0]] = r[1];

  std::vector<double> unbiased;
  std::map<std::string, std::vector<double>> biased;
  for (const auto& s : scores) {
    const auto it = label_of.find(s.post_id);
    if (it == label_of.end()) throw Error(Errc::SchemaError, "post " + s.post_id + " has no bias label");
    if (it->second == "none") unbiased.push_back(s.epsilon_n);
    else if (it->second != "multi") biased[it->second].push_back(s.epsilon_n);
  }

  fs::remove_all(store.transform("x").parent_path());
  std::map<std::string, debias::PolynomialTransform> transforms;
  json transformed = json::object(), dropped = json::object();
  if (c.debias.enabled) {
    debias::FitOptions opts;
    opts.n_bins = c.debias.bins;
    opts.bandwidth = c.debias.bandwidth;
    opts.max_iters = c.debias.max_iters;
    opts.learn_rate = c.debias.learn_rate;
    opts.tol = c.debias.tol;
    for (const auto& [kind, values] : biased) {
      if (values.size() < c.debias.min_posts || unbiased.size() < c.debias.min_posts) {
        dropped[kind] = values.size();
        continue;
      }
      const auto fit = c.debias.auto_degree
                           ? debias::fit_transform_auto(unbiased, values, c.debias.degree, opts)
                           : debias::fit_transform(unbiased, values, c.debias.degree, opts);
      write_json(store.transform(kind), debias::transform_to_json(kind, fit));
      transforms.emplace(kind, fit.transform);
      transformed[kind] = {{"n", values.size()},
                           {"degree", fit.transform.degree},
                           {"identity_kl", fit.report.identity_kl},
                           {"final_kl", fit.report.final_kl}};
    }
  }

  std::string out = "post_id,bias,epsilon_n,epsilon_nt\n";
  std::size_t rows = 0, multibias = 0;
  for (const auto& s : scores) {
    const auto& label = label_of.at(s.post_id);
    double nt = s.epsilon_n;
    if (label == "multi") {
      ++multibias;
      continue;
    }
    if (label != "none" && c.debias.enabled) {
      const auto t = transforms.find(label);
      if (t == transforms.end()) continue;
      nt = t->second(s.epsilon_n);
    }
    out += csv_quote(s.post_id) + ',' + label + ',' + format_double(s.epsilon_n) + ',' +
           format_double(nt) + '\n';
    ++rows;
  }
  write_text(store.targets(), out);
  write_json(store.debias_summary(), {{"enabled", c.debias.enabled},
                                      {"unbiased", unbiased.size()},
                                      {"transformed", transformed},
                                      {"dropped", dropped},
                                      {"multibias_excluded", multibias},
                                      {"targets", rows}});
}

void stage_features(const PipelineConfig& c, const ArtifactStore& store) {
  const auto registry = aesthetics::FeatureRegistry::standard(c.registry);
  write_json(store.registry(), registry.manifest());
  const auto targets = read_targets(store);
  std::map<std::string, std::string> image_of;
  for (const auto& s : read_scores(store)) image_of[s.post_id] = s.image;

  const fs::path base = c.corpus.parent_path();
  std::vector<aesthetics::FeatureRow> rows;
  json rejects = json::array();
  for (const auto& t : targets) {
    const auto it = image_of.find(t.post_id);
    if (it == image_of.end()) throw Error(Errc::SchemaError, "post " + t.post_id + " has no score row");
    try {
      const auto img = aesthetics::load_image(resolve(base, it->second), registry.params().max_side);
      rows.push_back({t.post_id, aesthetics::extract_features(img, registry).values});
    } catch (const Error& e) {
      rejects.push_back({{"post_id", t.post_id}, {"reason", e.what()}});
    }
  }
  aesthetics::write_feature_dump(store.features(), registry, rows);
  write_json(store.features_summary(),
             {{"registry_hash", registry.hash()}, {"rows", rows.size()}, {"rejects", rejects}});
}

struct Dataset {
  aesthetics::FeatureRegistry registry;
  std::vector<std::string> ids;
  std::map<std::string, std::vector<double>> x;
  std::map<std::string, double> y;
};

Dataset load_dataset(const ArtifactStore& store) {
  auto registry = store.load_registry();
  const auto summary = read_json(store.features_summary());
  if (summary.value("registry_hash", std::string()) != registry.hash())
    throw Error(Errc::RegistryMismatch, "feature dump was produced by a different registry");
  Dataset d{std::move(registry), {}, {}, {}};
  for (const auto& t : read_targets(store)) d.y[t.post_id] = t.epsilon_nt;
  for (auto& row : aesthetics::read_feature_dump(store.features(), d.registry)) {
    if (!d.y.contains(row.post_id))
      throw Error(Errc::SchemaError, "feature row " + row.post_id + " has no target");
    d.ids.push_back(row.post_id);
    d.x[row.post_id] = std::move(row.values);
  }
  return d;
}

void stage_train(const PipelineConfig& c, const ArtifactStore& store) {
  const auto d = load_dataset(store);
  if (d.ids.size() < 8) throw Error(Errc::InsufficientData, "fewer than 8 posts with features");
  auto order = d.ids;
  std::sort(order.begin(), order.end());
  shuffle(order, c.seed);
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(c.model.test_fraction * static_cast<double>(order.size()))), 1,
      order.size() - 2);
  std::vector<std::string> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::string> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());

  const auto labeling = model::quartile_labels(d.y);
  std::map<std::string, int> label;
  for (const auto& id : labeling.successful_ids) label[id] = 1;
  for (const auto& id : labeling.unsuccessful_ids) label[id] = -1;

  model::Matrix X;
  std::vector<double> y;
  model::Matrix Xc;
  std::vector<int> yc;
  for (const auto& id : train) {
    X.push_back(d.x.at(id));
    y.push_back(d.y.at(id));
    if (const auto it = label.find(id); it != label.end()) {
      Xc.push_back(d.x.at(id));
      yc.push_back(it->second);
    }
  }

  model::TrainOptions opts;
  opts.tol = c.model.tol;
  model::Hyperparams hp = c.model.hp;
  hp.kernel = model::KernelKind::Rbf;
  json grid = json::array();
  if (c.model.grid_search) {
    std::vector<model::Hyperparams> points;
    const std::vector<std::optional<double>> gammas =
        c.model.grid_gamma.empty() ? std::vector<std::optional<double>>{hp.gamma}
                                   : std::vector<std::optional<double>>(c.model.grid_gamma.begin(),
                                                                        c.model.grid_gamma.end());
    for (double C : c.model.grid_C)
      for (const auto& g : gammas) {
        auto p = hp;
        p.C = C;
        p.gamma = g;
        points.push_back(p);
      }
    const auto scored = model::grid_search_svr(X, y, points, c.model.folds, c.seed, opts);
    hp = model::best_grid_point(scored).hp;
    for (const auto& g : scored)
      grid.push_back({{"C", g.hp.C}, {"gamma", g.hp.gamma ? json(*g.hp.gamma) : json()}, {"score", g.score}});
  }

  const auto svr = model::train_svr(X, y, hp, d.registry.hash(), opts);
  write_json(store.model(), model::model_to_json(svr.model));
  const auto svc = model::train_svc(Xc, yc, hp, d.registry.hash(), opts);
  write_json(store.classifier(), model::model_to_json(svc.model));
  auto linear_hp = hp;
  linear_hp.kernel = model::KernelKind::Linear;
  const auto lin = model::train_svc(Xc, yc, linear_hp, d.registry.hash(), opts);
  write_json(store.significance_model(), model::model_to_json(lin.model));

  auto report = [](const model::TrainReport& r) {
    return json{{"iterations", r.iterations}, {"converged", r.converged}, {"max_kkt_violation", r.max_kkt_violation}};
  };
  write_json(store.split(), {{"train", train},
                             {"test", test},
                             {"lower_threshold", labeling.lower_threshold},
                             {"upper_threshold", labeling.upper_threshold},
                             {"successful", labeling.successful_ids},
                             {"unsuccessful", labeling.unsuccessful_ids},
                             {"C", hp.C},
                             {"epsilon", hp.epsilon},
                             {"grid", grid},
                             {"reports", {{"svr", report(svr.report)},
                                          {"svc", report(svc.report)},
                                          {"linear_svc", report(lin.report)}}}});
}

json stage_evaluate(const PipelineConfig& c, const ArtifactStore& store) {
  const auto d = load_dataset(store);
  const auto svr = store.load_model(d.registry);
  const auto read_model = [&](const fs::path& p) {
    auto m = model::model_from_json(read_json(p));
    if (m.registry_hash != d.registry.hash())
      throw Error(Errc::RegistryMismatch, p.string() + " was trained on a different registry");
    return m;
  };
  const auto svc = read_model(store.classifier());
  const auto lin = read_model(store.significance_model());
  const auto split = read_json(store.split());

  std::set<std::string> successful, unsuccessful;
  try {
    for (const auto& id : split.at("successful")) successful.insert(id.get<std::string>());
    for (const auto& id : split.at("unsuccessful")) unsuccessful.insert(id.get<std::string>());
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("split artifact: ") + e.what());
  }
  model::Matrix X, Xc;
  std::vector<double> y;
  std::vector<int> yc;
  std::size_t n_train = 0, train_labeled = 0;
  for (const auto& id : split.at("train")) {
    ++n_train;
    const auto s = id.get<std::string>();
    if (successful.contains(s) || unsuccessful.contains(s)) ++train_labeled;
  }
  for (const auto& id_json : split.at("test")) {
    const auto id = id_json.get<std::string>();
    const auto it = d.x.find(id);
    if (it == d.x.end()) throw Error(Errc::SchemaError, "test post " + id + " has no features");
    X.push_back(it->second);
    y.push_back(d.y.at(id));
    if (successful.contains(id) || unsuccessful.contains(id)) {
      Xc.push_back(it->second);
      yc.push_back(successful.contains(id) ? 1 : -1);
    }
  }
  const auto regression = model::evaluate_regressor(svr, X, y);
  auto classification = model::evaluate_classifier(svc, Xc, yc);
  classification.significance = model::linear_significance(lin, d.registry.ids(), c.model.significance_top);

  const auto features = read_json(store.features_summary());
  json report{{"registry_hash", d.registry.hash()},
              {"debias_enabled", c.debias.enabled},
              {"stages",
               {{"ingest", read_json(store.ingest_summary())},
                {"debias", read_json(store.debias_summary())},
                {"features", {{"rows", features.at("rows")}, {"rejects", features.at("rejects").size()}}},
                {"train", {{"posts", n_train}, {"labeled", train_labeled}, {"hyperparams", {{"C", split.at("C")}, {"epsilon", split.at("epsilon")}}}, {"solver", split.at("reports")}}},
                {"evaluate", {{"posts", X.size()}, {"labeled", Xc.size()}}}}},
              {"regression", model::evaluation_to_json(regression)},
              {"classification", model::evaluation_to_json(classification)}};
  write_json(store.evaluation(), report);
  return report;
}

std::string without_code(const std::string& what, Errc code) {
  const std::string prefix = std::string(to_string(code)) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

std::vector<fs::path> stage_outputs(const ArtifactStore& s, Stage stage) {
  switch (stage) {
    case Stage::Ingest: return {s.root / "ingest"};
    case Stage::Debias: return {s.root / "debias"};
    case Stage::Features: return {s.root / "features"};
    case Stage::Train: return {s.root / "model"};
    case Stage::Evaluate: return {s.evaluation()};
  }
  return {};
}

json run_one(const PipelineConfig& c, Stage s) {
  const ArtifactStore store{c.artifacts};
  try {
    json report;
    switch (s) {
      case Stage::Ingest: stage_ingest(c, store); break;
      case Stage::Debias: stage_debias(c, store); break;
      case Stage::Features: stage_features(c, store); break;
      case Stage::Train: stage_train(c, store); break;
      case Stage::Evaluate: report = stage_evaluate(c, store); break;
    }
    if (store.stale()) {
      const auto marker = read_json(store.stale_marker());
      if (marker.value("stage", std::string()) == to_string(s)) fs::remove(store.stale_marker());
    }
    return report;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    const Errc code = [&] {
      if (const auto* err = dynamic_cast<const Error*>(&e)) return err->code();
      return Errc::StageFailure;
    }();
    json stale = json::array();
    bool downstream = false;
    for (Stage later : kAllStages) {
      downstream = downstream || later == s;
      if (downstream)
        for (const auto& p : stage_outputs(store, later)) stale.push_back(p.string());
    }
    try {
      write_json(store.stale_marker(), {{"stage", to_string(s)}, {"error", e.what()}, {"stale", stale}});
    } catch (const Error&) {
    }
    throw StageError(s, code, without_code(e.what(), code));
  }
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Debias: return "debias";
    case Stage::Features: return "features";
    case Stage::Train: return "train";
    case Stage::Evaluate: return "evaluate";
  }
  return "unknown";
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::BadK:
    case Errc::NoSeedInVocabulary:
    case Errc::BudgetExceeded:
      return 2;
    case Errc::NonFiniteLoss:
    case Errc::StageFailure:
      return 4;
    default:
      return 3;
  }
}

PipelineConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  PipelineConfig c;
  try {
    const auto& corpus = j.at("corpus");
    if (corpus.is_string()) {
      c.corpus = resolve(base_dir, corpus.get<std::string>());
    } else {
      c.corpus = resolve(base_dir, corpus.at("path").get<std::string>());
      const auto fmt = corpus::parse_format(get_or<std::string>(corpus, "format", "csv"));
      if (!fmt) throw Error(Errc::ConfigError, "unknown corpus format");
      c.format = *fmt;
    }
    for (const auto& p : get_or<std::vector<std::string>>(j, "lexicons", {}))
      c.lexicons.push_back(resolve(base_dir, p));
    if (j.contains("embeddings") && !j.at("embeddings").is_null())
      c.embeddings = resolve(base_dir, j.at("embeddings").get<std::string>());
    c.expansion_m = get_or<std::size_t>(j, "expansion_m", c.expansion_m);
    for (const auto& h : get_or<json>(j, "holidays", json::array())) {
      const auto lex = bias::parse_lexicon(json{{"kind", "holiday"}, {"seeds", json::array()}, {"holidays", {h}}}.dump());
      c.holidays.push_back(lex.holiday_windows.front());
    }

    const auto dj = get_or<json>(j, "debias", json::object());
    c.debias.enabled = get_or(dj, "enabled", c.debias.enabled);
    if (dj.contains("degree") && dj.at("degree").is_string()) {
      if (dj.at("degree") != "auto") throw Error(Errc::ConfigError, "debias degree must be an integer or \"auto\"");
      c.debias.auto_degree = true;
      c.debias.degree = get_or(dj, "max_degree", 3);
    } else {
      c.debias.degree = get_or(dj, "degree", c.debias.degree);
    }
    c.debias.bins = get_or(dj, "bins", c.debias.bins);
    if (dj.contains("bandwidth") && !dj.at("bandwidth").is_null()) c.debias.bandwidth = dj.at("bandwidth").get<double>();
    c.debias.max_iters = get_or(dj, "max_iters", c.debias.max_iters);
    c.debias.learn_rate = get_or(dj, "learn_rate", c.debias.learn_rate);
    c.debias.tol = get_or(dj, "tol", c.debias.tol);
    c.debias.min_posts = get_or(dj, "min_posts", c.debias.min_posts);

    const auto rj = get_or<json>(j, "registry", json::object());
    auto& r = c.registry;
    r.segments.k = get_or(rj, "segments_k", r.segments.k);
    r.segments.min_area_frac = get_or(rj, "segments_min_area_frac", r.segments.min_area_frac);
    r.segments.seed = get_or(rj, "segments_seed", r.segments.seed);
    r.segments.max_iters = get_or(rj, "segments_max_iters", r.segments.max_iters);
    r.rag.sigma_c = get_or(rj, "rag_sigma_c", r.rag.sigma_c);
    r.rag.merge_threshold = get_or(rj, "rag_merge_threshold", r.rag.merge_threshold);
    r.rag.ncut_stop = get_or(rj, "rag_ncut_stop", r.rag.ncut_stop);
    r.rag.max_depth = get_or(rj, "rag_max_depth", r.rag.max_depth);
    r.wavelet_levels = get_or(rj, "wavelet_levels", r.wavelet_levels);
    r.blur_cutoff = get_or(rj, "blur_cutoff", r.blur_cutoff);
    r.edge_energy = get_or(rj, "edge_energy", r.edge_energy);
    r.region_min_frac = get_or(rj, "region_min_frac", r.region_min_frac);
    r.max_side = get_or(rj, "max_side", r.max_side);

    const auto mj = get_or<json>(j, "model", json::object());
    c.model.hp.C = get_or(mj, "C", c.model.hp.C);
    c.model.hp.epsilon = get_or(mj, "epsilon", c.model.hp.epsilon);
    if (mj.contains("gamma") && !mj.at("gamma").is_null()) c.model.hp.gamma = mj.at("gamma").get<double>();
    c.model.tol = get_or(mj, "tol", c.model.tol);
    c.model.test_fraction = get_or(mj, "test_fraction", c.model.test_fraction);
    c.model.grid_search = get_or(mj, "grid_search", c.model.grid_search);
    c.model.folds = get_or(mj, "folds", c.model.folds);
    c.model.grid_C = get_or(mj, "grid_C", c.model.grid_C);
    c.model.grid_gamma = get_or(mj, "grid_gamma", c.model.grid_gamma);
    c.model.significance_top = get_or(mj, "significance_top", c.model.significance_top);

    const auto tj = get_or<json>(j, "tuner", json::object());
    c.tuner.k = get_or(tj, "k", c.tuner.k);
    c.tuner.s = get_or(tj, "s", c.tuner.s);
    c.tuner.t = get_or(tj, "t", c.tuner.t);

    c.artifacts = resolve(base_dir, j.at("artifacts").get<std::string>());
    const auto sj = get_or<json>(j, "service", json::object());
    c.service.host = get_or(sj, "host", c.service.host);
    c.service.port = get_or(sj, "port", c.service.port);
    c.seed = get_or(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("config: ") + e.what());
  }
  c.registry.segments.seed = get_or(get_or<json>(j, "registry", json::object()), "segments_seed", c.seed);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ConfigError, "config " + path.string() + " is not valid JSON");
  return parse_config(j, fs::absolute(path).parent_path());
}

json config_to_json(const PipelineConfig& c) {
  json holidays = json::array();
  for (const auto& h : c.holidays) {
    char date[8];
    std::snprintf(date, sizeof date, "%02u-%02u", h.month, h.day);
    holidays.push_back({{"name", h.name}, {"date", date}, {"pre_days", h.pre_days}, {"post_days", h.post_days}});
  }
  std::vector<std::string> lexicons;
  for (const auto& p : c.lexicons) lexicons.push_back(relative_or_absolute(p));
  const auto& r = c.registry;
  json j{{"corpus", {{"path", relative_or_absolute(c.corpus)}, {"format", c.format == corpus::Format::Csv ? "csv" : "jsonlines"}}},
         {"lexicons", lexicons},
         {"embeddings", c.embeddings ? json(relative_or_absolute(*c.embeddings)) : json()},
         {"expansion_m", c.expansion_m},
         {"holidays", holidays},
         {"debias", {{"enabled", c.debias.enabled},
                     {"degree", c.debias.auto_degree ? json("auto") : json(c.debias.degree)},
                     {"max_degree", c.debias.degree},
                     {"bins", c.debias.bins},
                     {"bandwidth", c.debias.bandwidth ? json(*c.debias.bandwidth) : json()},
                     {"max_iters", c.debias.max_iters},
                     {"learn_rate", c.debias.learn_rate},
                     {"tol", c.debias.tol},
                     {"min_posts", c.debias.min_posts}}},
         {"registry", {{"segments_k", r.segments.k},
                       {"segments_min_area_frac", r.segments.min_area_frac},
                       {"segments_seed", r.segments.seed},
                       {"segments_max_iters", r.segments.max_iters},
                       {"rag_sigma_c", r.rag.sigma_c},
                       {"rag_merge_threshold", r.rag.merge_threshold},
                       {"rag_ncut_stop", r.rag.ncut_stop},
                       {"rag_max_depth", r.rag.max_depth},
                       {"wavelet_levels", r.wavelet_levels},
                       {"blur_cutoff", r.blur_cutoff},
                       {"edge_energy", r.edge_energy},
                       {"region_min_frac", r.region_min_frac},
                       {"max_side", r.max_side}}},
         {"model", {{"C", c.model.hp.C},
                    {"epsilon", c.model.hp.epsilon},
                    {"gamma", c.model.hp.gamma ? json(*c.model.hp.gamma) : json()},
                    {"tol", c.model.tol},
                    {"test_fraction", c.model.test_fraction},
                    {"grid_search", c.model.grid_search},
                    {"folds", c.model.folds},
                    {"grid_C", c.model.grid_C},
                    {"grid_gamma", c.model.grid_gamma},
                    {"significance_top", c.model.significance_top}}},
         {"tuner", {{"k", c.tuner.k}, {"s", c.tuner.s}, {"t", c.tuner.t}}},
         {"artifacts", relative_or_absolute(c.artifacts)},
         {"service", {{"host", c.service.host}, {"port", c.service.port}}},
         {"seed", c.seed}};
  return j;
}

void validate(const PipelineConfig& c) {
  auto need = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw Error(Errc::ConfigError, std::string(what) + " not found: " + p.string());
  };
  need(c.corpus, "corpus");
  for (const auto& p : c.lexicons) need(p, "lexicon");
  if (c.embeddings) need(*c.embeddings, "embedding file");
  if (c.artifacts.empty()) throw Error(Errc::ConfigError, "artifact directory is not set");
  auto check = [](bool ok, const char* msg) {
    if (!ok) throw Error(Errc::ConfigError, msg);
  };
  check(c.debias.degree >= 1, "debias degree must be at least 1");
  check(c.debias.bins >= 2, "debias bins must be at least 2");
  check(!c.debias.bandwidth || *c.debias.bandwidth > 0.0, "debias bandwidth must be positive");
  check(c.debias.learn_rate > 0.0, "debias learn_rate must be positive");
  check(c.debias.tol > 0.0, "debias tol must be positive");
  check(c.debias.min_posts >= 10, "debias min_posts must be at least 10 (the fit minimum)");
  check(c.registry.segments.k >= 2, "registry segments_k must be at least 2");
  check(c.registry.wavelet_levels >= 1, "registry wavelet_levels must be at least 1");
  check(c.registry.max_side >= 8, "registry max_side must be at least 8");
  check(c.model.hp.C > 0.0, "model C must be positive");
  check(c.model.hp.epsilon >= 0.0, "model epsilon must be non-negative");
  check(!c.model.hp.gamma || *c.model.hp.gamma > 0.0, "model gamma must be positive");
  check(c.model.tol > 0.0, "model tol must be positive");
  check(c.model.test_fraction > 0.0 && c.model.test_fraction < 1.0, "model test_fraction must lie in (0, 1)");
  check(c.model.folds >= 2, "model folds must be at least 2");
  check(c.tuner.k >= 1, "tuner k must be positive");
  check(c.tuner.s > 0.0 && c.tuner.t > 0.0 && c.tuner.t <= c.tuner.s, "tuner needs 0 < t <= s");
  check(c.service.port >= 0 && c.service.port <= 65535, "service port out of range");
  if (!c.holidays.empty()) {
    bool has_holiday_lexicon = false;
    for (const auto& p : c.lexicons) has_holiday_lexicon |= bias::load_lexicon(p).kind == BiasKind::Holiday;
    check(has_holiday_lexicon, "holidays are configured but no holiday lexicon is listed");
  }
}

aesthetics::FeatureRegistry ArtifactStore::load_registry() const {
  return aesthetics::FeatureRegistry::from_manifest(read_json(registry()));
}

model::EngagementModel ArtifactStore::load_model(const aesthetics::FeatureRegistry& registry) const {
  auto m = model::model_from_json(read_json(model()));
  if (m.registry_hash != registry.hash())
    throw Error(Errc::RegistryMismatch, "model registry " + m.registry_hash + " does not match " + registry.hash());
  return m;
}

void run_stage(const PipelineConfig& c, Stage s) {
  try {
    validate(c);
  } catch (const Error& e) {
    throw StageError(s, e.code(), without_code(e.what(), e.code()));
  }
  run_one(c, s);
}

json run_pipeline(const PipelineConfig& c) {
  validate(c);
  const ArtifactStore store{c.artifacts};
  fs::create_directories(store.root);
  fs::remove(store.stale_marker());
  json report;
  for (Stage s : kAllStages) report = run_one(c, s);
  return report;
}

}  // namespace adlens::pipeline
