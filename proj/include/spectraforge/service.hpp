#pragma once

#include "spectraforge/model.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace spectraforge {

struct ServiceResponse {
  int status = 200;
  std::string body;
};

/// Inference endpoints over one immutable model. Handlers are const and
/// safe to call concurrently.
///
///   GET  /meta         {layout, min, max, n_vertices, faces, model_id, method}
///   POST /reconstruct  {"values": [...], "faces": false} -> {"vertices": [[x, y, z], ...]}
///   GET  /health       {"status": "ok"}
///
/// Coordinates are printed with 9 significant digits, which round-trips the
/// decoder's float32 outputs.
class InferenceService {
 public:
  explicit InferenceService(ShapeModel model);
  ~InferenceService();
  InferenceService(const InferenceService&) = delete;
  InferenceService& operator=(const InferenceService&) = delete;

  const ShapeModel& model() const { return model_; }

  ServiceResponse meta() const;
  ServiceResponse reconstruct(std::string_view request_body) const;
  ServiceResponse health() const;

  /// Binds the HTTP server; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires bind().
  void listen();
  void stop();

 private:
  struct Http;
  ShapeModel model_;
  std::string meta_body_;
  std::unique_ptr<Http> http_;
};

/// Vertices as the /reconstruct body prints them.
std::string vertices_json(const Vertices& vertices, const Faces* faces = nullptr);

}  // namespace spectraforge
