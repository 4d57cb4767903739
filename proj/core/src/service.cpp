#include "adlens/service.hpp"

#include <cctype>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include "adlens/error.hpp"
#include "adlens/tuner.hpp"

namespace adlens::service {

using aesthetics::FeatureVector;
using nlohmann::json;

namespace {

Response error_response(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", code}, {"message", message}}};
}

Response from_error(const Error& e) {
  switch (e.code()) {
    case Errc::UnknownFeature: return error_response(422, "unknown_feature", e.what());
    case Errc::DecodeError:
    case Errc::UnsupportedFormat:
    case Errc::TooSmall: return error_response(422, "bad_image", e.what());
    case Errc::BudgetExceeded: return error_response(422, "budget_exceeded", e.what());
    case Errc::RegistryMismatch: return error_response(409, "registry_mismatch", e.what());
    case Errc::SchemaError:
    case Errc::ConfigError:
    case Errc::DimensionMismatch: return error_response(400, "bad_request", e.what());
    default: return error_response(500, "internal", e.what());
  }
}

json feature_map(const aesthetics::FeatureRegistry& r, const FeatureVector& v) {
  json out = json::object();
  for (std::size_t i = 0; i < r.size(); ++i) out[r[i].id] = v.values[i];
  return out;
}

}  // namespace

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.substr(0, 5) == "data:") {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw Error(Errc::SchemaError, "malformed data URL");
    text.remove_prefix(comma + 1);
  }
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw Error(Errc::SchemaError, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw Error(Errc::SchemaError, "invalid base64");
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Service::Service(aesthetics::FeatureRegistry registry, model::EngagementModel model,
                 pipeline::TunerDefaults defaults)
    : registry_(std::move(registry)), model_(std::move(model)), defaults_(defaults) {
  if (model_.registry_hash != registry_.hash())
    throw Error(Errc::RegistryMismatch, "model registry " + model_.registry_hash +
                                            " does not match " + registry_.hash());
  if (model_.num_features() != registry_.size())
    throw Error(Errc::DimensionMismatch, "model and registry differ in feature count");
}

Service Service::from_artifacts(const pipeline::ArtifactStore& store, pipeline::TunerDefaults defaults) {
  if (store.stale())
    throw Error(Errc::StageFailure, "artifacts in " + store.root.string() + " are marked stale");
  auto registry = store.load_registry();
  auto m = store.load_model(registry);
  return Service(std::move(registry), std::move(m), defaults);
}

FeatureVector Service::features_from(const json& body) const {
  if (body.contains("image")) {
    if (!body.at("image").is_string()) throw Error(Errc::SchemaError, "image must be a base64 string");
    const auto bytes = base64_decode(body.at("image").get<std::string>());
    const auto img = aesthetics::decode_image(bytes, registry_.params().max_side);
    return aesthetics::extract_features(img, registry_);
  }
  if (!body.contains("features") || !body.at("features").is_object())
    throw Error(Errc::SchemaError, "request needs an image or a features object");
  const auto& f = body.at("features");
  FeatureVector v{registry_.hash(), std::vector<double>(registry_.size(), 0.0)};
  std::vector<bool> seen(registry_.size(), false);
  for (const auto& [id, value] : f.items()) {
    const auto idx = registry_.index_of(id);
    if (!idx) throw Error(Errc::UnknownFeature, "unknown feature: " + id);
    if (!value.is_number()) throw Error(Errc::SchemaError, "feature " + id + " is not a number");
    v.values[*idx] = value.get<double>();
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw Error(Errc::SchemaError, "missing feature: " + registry_[i].id);
  return v;
}

Response Service::score(const json& body) const {
  if (!body.contains("image")) throw Error(Errc::SchemaError, "score needs an image");
  const auto v = features_from(body);
  return {200, {{"features", feature_map(registry_, v)}, {"predicted", model::predict(model_, v)}}};
}

Response Service::tune(const json& body) const {
  const auto v = features_from(body);
  tuner::TunerParams p;
  try {
    p.k = body.value("k", defaults_.k);
    p.s = body.value("s", defaults_.s);
    p.t = body.value("t", defaults_.t);
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("k, s and t must be numbers: ") + e.what());
  }
  return {200, tuner::suggestion_to_json(tuner::suggest(model_, registry_, v, p))};
}

Response Service::whatif(const json& body) const {
  const auto v = features_from(body);
  std::map<std::string, double> deltas;
  if (body.contains("deltas")) {
    if (!body.at("deltas").is_object()) throw Error(Errc::SchemaError, "deltas must be an object");
    for (const auto& [id, pct] : body.at("deltas").items()) {
      if (!pct.is_number()) throw Error(Errc::SchemaError, "delta for " + id + " is not a number");
      deltas[id] = pct.get<double>();
    }
  }
  const auto r = tuner::whatif(model_, registry_, v, deltas);
  return {200, {{"predicted", r.predicted}, {"adjusted", feature_map(registry_, r.adjusted)}}};
}

Response Service::manifest() const { return {200, registry_.manifest()}; }

Response Service::health() const {
  return {200, {{"status", "ok"}, {"registry_hash", registry_.hash()}}};
}

Response Service::handle(std::string_view method, std::string_view path, std::string_view body) const {
  struct Route {
    std::string_view method, path;
    Response (Service::*post)(const json&) const;
    Response (Service::*get)() const;
  };
  static const Route routes[] = {{"POST", "/v1/score", &Service::score, nullptr},
                                 {"POST", "/v1/tune", &Service::tune, nullptr},
                                 {"POST", "/v1/whatif", &Service::whatif, nullptr},
                                 {"GET", "/v1/registry", nullptr, &Service::manifest},
                                 {"GET", "/v1/health", nullptr, &Service::health}};
  for (const auto& r : routes) {
    if (r.path != path) continue;
    if (r.method != method) return error_response(405, "method_not_allowed", "use " + std::string(r.method));
    try {
      if (r.get) return (this->*r.get)();
      const json j = json::parse(body, nullptr, false);
      if (j.is_discarded() || !j.is_object()) return error_response(400, "bad_request", "body must be a JSON object");
      return (this->*r.post)(j);
    } catch (const Error& e) {
      return from_error(e);
    } catch (const std::exception& e) {
      return error_response(500, "internal", e.what());
    }
  }
  return error_response(404, "not_found", "no route for " + std::string(path));
}

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(const Service& service) : impl_(new Impl{service, {}, {}}) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->server.Get(R"(/.*)", handler);
  impl_->server.Post(R"(/.*)", handler);
  impl_->server.Put(R"(/.*)", handler);
  impl_->server.Delete(R"(/.*)", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace adlens::service
