#pragma once

#include "evr/camera.hpp"
#include "evr/dataset.hpp"
#include "evr/params.hpp"
#include "evr/renderer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace evr {

/// Parsed body of a /render request or a /stream message.
struct RenderRequest {
  nlohmann::json id;  // echoed back on /stream; null when absent
  Camera camera;      // already resized to the requested width x height
  int quality = 100;  // accepted for forward compatibility; frames are always PNG
};

/// Validates a request object. Throws ArgumentError whose message starts with
/// the offending field ("camera.rotation: ...", "width: ...").
RenderRequest parse_render_request(const nlohmann::json& body, int upsample);

/// Cumulative per-stage render time in milliseconds.
struct ServiceCounters {
  uint64_t frames = 0;
  uint64_t failures = 0;
  StageTimings stages;
};

/// Immutable scene snapshot shared by every connection.
class ServiceSession {
 public:
  ServiceSession(MultiViewDataset data, ModelConfig model, ModelParams params, RenderConfig config,
                 std::vector<int> pool = {});
  /// Loads a checkpoint and the dataset it references. Throws IoError.
  static std::shared_ptr<ServiceSession> from_checkpoint(const std::filesystem::path& dir);

  /// Rig, depth bounds, resolution options and render settings.
  nlohmann::json scene_json() const;
  /// Thread-safe; updates the counters.
  RenderOutput render(const Camera& camera) const;
  ServiceCounters counters() const;
  nlohmann::json counters_json() const;

  const RenderConfig& config() const { return config_; }
  const MultiViewDataset& dataset() const { return *data_; }

 private:
  std::unique_ptr<MultiViewDataset> data_;
  std::unique_ptr<Renderer> renderer_;
  ModelParams params_;
  RenderConfig config_;
  std::vector<int> pool_;
  mutable std::mutex counters_mutex_;
  mutable ServiceCounters counters_;
};

struct ServiceOptions {
  std::string address = "127.0.0.1";
  uint16_t port = 8080;  // 0 picks a free port
  int io_threads = 1;
  int render_threads = 2;
};

/// HTTP + WebSocket front end:
///   GET /scene, GET /stats, POST /render, WebSocket /stream.
class RenderService {
 public:
  RenderService(std::shared_ptr<const ServiceSession> session, ServiceOptions options);
  ~RenderService();
  RenderService(const RenderService&) = delete;
  RenderService& operator=(const RenderService&) = delete;

  /// Binds and starts serving in background threads; returns the bound port.
  /// Throws IoError when the address cannot be bound.
  uint16_t start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evr
