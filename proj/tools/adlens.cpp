#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "adlens/aesthetics/image.hpp"
#include "adlens/pipeline.hpp"
#include "adlens/service.hpp"
#include "adlens/synthetic.hpp"
#include "adlens/tuner.hpp"

namespace fs = std::filesystem;
using namespace adlens;

namespace {

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_stage(const std::string& config_path, pipeline::Stage stage) {
  const auto c = pipeline::load_config(config_path);
  pipeline::run_stage(c, stage);
  if (stage == pipeline::Stage::Evaluate) {
    std::ifstream in(pipeline::ArtifactStore{c.artifacts}.evaluation());
    std::cout << in.rdbuf();
  } else {
    std::cout << "stage " << pipeline::to_string(stage) << " done\n";
  }
  return 0;
}

int write_synthetic(const fs::path& dir, const synthetic::CorpusOptions& opts, bool debias) {
  const auto corpus = synthetic::generate_corpus(dir, opts);
  pipeline::PipelineConfig c;
  c.corpus = corpus.corpus;
  c.lexicons = corpus.lexicons;
  c.embeddings = corpus.embeddings;
  c.expansion_m = 3;
  c.artifacts = dir / "artifacts";
  c.seed = opts.seed;
  c.registry.segments.seed = opts.seed;
  c.debias.enabled = debias;
  auto j = pipeline::config_to_json(c);
  // Paths relative to the config file.
  j["corpus"]["path"] = fs::relative(c.corpus, dir).string();
  j["embeddings"] = fs::relative(*c.embeddings, dir).string();
  j["lexicons"] = {fs::relative(c.lexicons[0], dir).string(), fs::relative(c.lexicons[1], dir).string()};
  j["artifacts"] = "artifacts";
  std::ofstream(dir / "config.json") << j.dump(2) << '\n';
  nlohmann::json truth = nlohmann::json::array();
  for (const auto& p : corpus.posts)
    truth.push_back({{"post_id", p.post_id},
                     {"true_score", p.true_score},
                     {"bias", p.bias ? nlohmann::json(std::string(to_string(*p.bias))) : nlohmann::json()}});
  std::ofstream(dir / "planted.json") << nlohmann::json{{"planted_features", corpus.planted_features}, {"posts", truth}}.dump(2)
                                      << '\n';
  std::cout << "wrote " << corpus.posts.size() << " posts and " << (dir / "config.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adlens: engagement scoring, debiasing and feature tuning for promotional images"};
  app.require_subcommand(1);
  std::string config = "adlens.json";

  struct StageCommand {
    const char* name;
    const char* help;
    pipeline::Stage stage;
  };
  const StageCommand stages[] = {
      {"ingest", "Load the corpus, normalize scores per page and assign bias labels", pipeline::Stage::Ingest},
      {"debias", "Fit and apply per-bias score transforms", pipeline::Stage::Debias},
      {"features", "Extract aesthetic features for every post", pipeline::Stage::Features},
      {"train", "Train the engagement regressor and quartile classifiers", pipeline::Stage::Train},
      {"evaluate", "Evaluate on the held-out split and print the report", pipeline::Stage::Evaluate}};
  std::vector<std::pair<CLI::App*, pipeline::Stage>> stage_cmds;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    cmd->add_option("--config,-c", config, "Pipeline config (JSON)")->required();
    stage_cmds.emplace_back(cmd, s.stage);
  }

  auto* run = app.add_subcommand("run", "Run every stage in order");
  run->add_option("--config,-c", config, "Pipeline config (JSON)")->required();

  std::string image;
  std::optional<int> k;
  std::optional<double> s, t;
  auto* tune = app.add_subcommand("tune", "Suggest feature changes for one image");
  tune->add_option("--image", image, "PNG or JPEG file")->required()->check(CLI::ExistingFile);
  tune->add_option("--config,-c", config, "Pipeline config (JSON)");
  tune->add_option("--k", k, "Maximum number of features changed");
  tune->add_option("--s", s, "Maximum change per feature, percent");
  tune->add_option("--t", t, "Step size, percent");

  std::optional<std::string> host;
  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over trained artifacts");
  serve->add_option("--config,-c", config, "Pipeline config (JSON)")->required();
  serve->add_option("--host", host, "Bind address (overrides the config)");
  serve->add_option("--port", port, "Port, 0 for any (overrides the config)");

  std::string out_dir;
  synthetic::CorpusOptions synth_opts;
  bool no_debias = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted scores and biases");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--posts", synth_opts.posts, "Number of posts")->capture_default_str();
  synth->add_option("--pages", synth_opts.pages, "Number of pages")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "Random seed")->capture_default_str();
  synth->add_flag("--no-debias", no_debias, "Write a config with debiasing disabled");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& [cmd, stage] : stage_cmds)
      if (cmd->parsed()) return run_stage(config, stage);
    if (run->parsed()) {
      std::cout << pipeline::run_pipeline(pipeline::load_config(config)).dump(2) << '\n';
      return 0;
    }
    if (tune->parsed()) {
      const auto c = pipeline::load_config(config);
      const auto svc = service::Service::from_artifacts({c.artifacts}, c.tuner);
      const auto img = aesthetics::load_image(image, svc.registry().params().max_side);
      const auto x = aesthetics::extract_features(img, svc.registry());
      tuner::TunerParams p;
      p.k = k.value_or(c.tuner.k);
      p.s = s.value_or(c.tuner.s);
      p.t = t.value_or(c.tuner.t);
      std::cout << tuner::suggestion_to_json(tuner::suggest(svc.model(), svc.registry(), x, p)).dump(2) << '\n';
      return 0;
    }
    if (serve->parsed()) {
      const auto c = pipeline::load_config(config);
      const auto svc = service::Service::from_artifacts({c.artifacts}, c.tuner);
      service::HttpServer server(svc);
      const int bound = server.bind(host.value_or(c.service.host), port.value_or(c.service.port));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << host.value_or(c.service.host) << ':' << bound << std::endl;
      server.listen();
      g_server = nullptr;
      return 0;
    }
    if (synth->parsed()) return write_synthetic(out_dir, synth_opts, !no_debias);
  } catch (const Error& e) {
    std::cerr << "adlens: " << e.what() << '\n';
    return pipeline::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "adlens: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
