#include "spectraforge/service.hpp"

#include "json_support.hpp"

#include "httplib.h"

#include <cmath>
#include <cstdio>

namespace spectraforge {
namespace {

constexpr double kNegativeTolerance = 1e-9;
constexpr const char* kJson = "application/json";

ServiceResponse error_response(int status, const std::string& message) {
  return {status, nlohmann::json{{"error", message}}.dump()};
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}

}  // namespace

struct InferenceService::Http {
  httplib::Server server;
};

std::string vertices_json(const Vertices& vertices, const Faces* faces) {
  std::string out = "{\"vertices\":[";
  out.reserve(static_cast<std::size_t>(vertices.rows()) * 40 + 32);
  for (Index i = 0; i < vertices.rows(); ++i) {
    if (i > 0) out += ',';
    out += '[';
    for (int c = 0; c < 3; ++c) {
      if (c > 0) out += ',';
      append_number(out, vertices(i, c));
    }
    out += ']';
  }
  out += ']';
  if (faces) {
    out += ",\"faces\":[";
    for (Index f = 0; f < faces->rows(); ++f) {
      if (f > 0) out += ',';
      out += '[' + std::to_string((*faces)(f, 0)) + ',' + std::to_string((*faces)(f, 1)) + ',' +
             std::to_string((*faces)(f, 2)) + ']';
    }
    out += ']';
  }
  out += '}';
  return out;
}

InferenceService::InferenceService(ShapeModel model) : model_(std::move(model)) {
  nlohmann::json faces = nlohmann::json::array();
  for (Index f = 0; f < model_.faces.rows(); ++f) {
    faces.push_back({model_.faces(f, 0), model_.faces(f, 1), model_.faces(f, 2)});
  }
  meta_body_ = nlohmann::json{{"layout", model_.layout},
                              {"min", vector_to_json(model_.stats.min)},
                              {"max", vector_to_json(model_.stats.max)},
                              {"n_vertices", model_.network.shape().n_vertices},
                              {"faces", faces},
                              {"model_id", model_.fingerprint()},
                              {"method", model_.recipe.name(model_.layout.size() - 1)}}
                   .dump();
}

InferenceService::~InferenceService() { stop(); }

ServiceResponse InferenceService::meta() const { return {200, meta_body_}; }

ServiceResponse InferenceService::health() const { return {200, "{\"status\":\"ok\"}"}; }

ServiceResponse InferenceService::reconstruct(std::string_view request_body) const {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(request_body);
  } catch (const nlohmann::json::exception&) {
    return error_response(400, "request body is not valid JSON");
  }
  if (!request.is_object() || !request.contains("values") || !request["values"].is_array()) {
    return error_response(400, "expected {\"values\": [...]}");
  }
  const auto& values = request["values"];
  const Index expected = layout_size(model_.layout);
  if (static_cast<Index>(values.size()) != expected) {
    return error_response(400, "expected " + std::to_string(expected) + " values, got " + std::to_string(values.size()));
  }
  SpectralEncoding encoding{Eigen::VectorXd(expected), model_.layout};
  for (Index i = 0; i < expected; ++i) {
    const auto& v = values[static_cast<std::size_t>(i)];
    if (!v.is_number()) return error_response(400, "value " + std::to_string(i) + " is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) return error_response(400, "value " + std::to_string(i) + " is not finite");
    encoding.values(i) = x;
  }
  for (Index i = 0; i < expected; ++i) {
    if (encoding.values(i) < -kNegativeTolerance) {
      return error_response(422, "value " + std::to_string(i) + " is negative; eigenvalue gaps cannot be");
    }
  }
  const bool with_faces = request.value("faces", false);
  const Mesh mesh = spectraforge::reconstruct(model_, encoding);
  return {200, vertices_json(mesh.vertices, with_faces ? &model_.faces : nullptr)};
}

int InferenceService::bind(const std::string& host, int port) {
  if (http_) throw Error("service is already bound");
  http_ = std::make_unique<Http>();
  auto& server = http_->server;
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, kJson);
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Get("/meta", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, meta()); });
  server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
  server.Post("/reconstruct", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, reconstruct(req.body));
  });
  server.Options("/reconstruct", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    http_.reset();
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void InferenceService::listen() {
  if (!http_) throw Error("service is not bound");
  http_->server.listen_after_bind();
}

void InferenceService::stop() {
  if (http_) http_->server.stop();
}

}  // namespace spectraforge
