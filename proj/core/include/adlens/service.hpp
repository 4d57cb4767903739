#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adlens/aesthetics/features.hpp"
#include "adlens/model.hpp"
#include "adlens/pipeline.hpp"

namespace adlens::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Accepts an optional "data:...;base64," prefix and embedded whitespace.
// Throws SchemaError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

// Request handling over immutable artifacts; safe to share across threads.
class Service {
 public:
  Service(aesthetics::FeatureRegistry registry, model::EngagementModel model,
          pipeline::TunerDefaults defaults = {});

  // Throws StageFailure when the store is marked stale and RegistryMismatch
  // when the model does not belong to the registry.
  static Service from_artifacts(const pipeline::ArtifactStore& store,
                                pipeline::TunerDefaults defaults = {});

  const aesthetics::FeatureRegistry& registry() const { return registry_; }
  const model::EngagementModel& model() const { return model_; }

  Response score(const nlohmann::json& body) const;
  Response tune(const nlohmann::json& body) const;
  Response whatif(const nlohmann::json& body) const;
  Response manifest() const;
  Response health() const;

  // Routes /v1/* requests; errors become {"error", "message"} bodies.
  Response handle(std::string_view method, std::string_view path, std::string_view body) const;

 private:
  aesthetics::FeatureVector features_from(const nlohmann::json& body) const;

  aesthetics::FeatureRegistry registry_;
  model::EngagementModel model_;
  pipeline::TunerDefaults defaults_;
};

class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  // Runs listen() on a background thread and waits until it accepts.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace adlens::service
