#pragma once

#include "evr/camera.hpp"
#include "evr/dataset.hpp"
#include "evr/density_head.hpp"
#include "evr/grid.hpp"
#include "evr/params.hpp"
#include "evr/ray.hpp"
#include "evr/render_head.hpp"
#include "evr/sweep.hpp"
#include "evr/visibility.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace evr {

enum class Aggregation {
  visibility,  // weights from the per-view visibility volumes
  average,     // unit weight for every valid view
};

struct RenderConfig {
  int uniform_samples = 128;     // N_u
  int hierarchical_samples = 8;  // N_h
  int input_views = 3;           // N
  int upsample = 4;
  bool deterministic = true;
  uint64_t seed = 0;
  Aggregation aggregation = Aggregation::visibility;
  int workers = 1;  // <= 0: all hardware threads

  void validate() const;
};

nlohmann::json render_config_to_json(const RenderConfig& config);
/// Missing keys keep their defaults. Throws ConfigError.
RenderConfig render_config_from_json(const nlohmann::json& j);

/// Wall time per pipeline stage, milliseconds.
struct StageTimings {
  double encoder = 0.0;
  double geometry = 0.0;
  double visibility = 0.0;
  double integration = 0.0;
  double render_head = 0.0;
  double total = 0.0;

  double stage_sum() const { return encoder + geometry + visibility + integration + render_head; }
};

struct RenderOutput {
  FeatureMap features;       // F_lr: H_T x W_T x C_T
  Image inter;               // I_inter: H_T x W_T x 3
  Image image;               // I_hr: (upsample H_T) x (upsample W_T) x 3, in [0, 1]
  FeatureMap transmittance;  // H_T x W_T x 1, per-ray T after the last sample
  std::vector<int> views;    // dataset indices of the input views, nearest first
  StageTimings timings;
};

/// Everything a forward pass computed, kept for the adjoint pass and for
/// inspection tools.
struct FrameState {
  Camera camera;
  RenderConfig config;
  ModelParams params;
  std::vector<int> views;
  std::vector<FeatureMap> geometry;  // F^G per selected view
  std::vector<FeatureMap> texture;   // F^T per selected view
  FrustumGrid frustum;
  std::vector<Vec3> points;
  SweptFeatures swept;
  FusedVolume fused;
  std::optional<VolumeGrid> offset;
  DensityHeadOutput density;
  std::vector<ViewVisibility> visibility;  // empty under average aggregation
  RenderHeadOutput head;
  RenderOutput output;
  int low_width = 0;
  int low_height = 0;
};

/// Renders novel views of one dataset. The dataset must outlive the renderer.
class Renderer {
 public:
  Renderer(const MultiViewDataset& data, ModelConfig model);

  const MultiViewDataset& dataset() const { return *data_; }
  const ModelConfig& model() const { return model_; }

  /// Read-only forward pass; safe to call concurrently. `pool` restricts the
  /// candidate input views (empty: every dataset view). The novel image size
  /// is the camera's size and must be divisible by config.upsample.
  RenderOutput render(const Camera& camera, const ModelParams& params, const RenderConfig& config,
                      std::span<const int> pool = {}) const;

  /// Forward pass whose intermediate state is retained for backward().
  const RenderOutput& forward(const Camera& camera, const ModelParams& params, const RenderConfig& config,
                              std::span<const int> pool = {});

  /// Accumulates dL/dparams into `grads` given dL/dI_hr and dL/dI_inter
  /// (either may be null). Throws StateError without a retained forward pass.
  void backward(const Image* grad_image, const Image* grad_inter, ModelParams& grads) const;

  bool has_frame() const { return frame_ != nullptr; }
  /// Last retained forward pass; throws StateError when there is none.
  const FrameState& frame() const;
  void release() { frame_.reset(); }

  /// Builds the full frame state without timing or tape bookkeeping.
  FrameState evaluate(const Camera& camera, const ModelParams& params, const RenderConfig& config,
                      std::span<const int> pool = {}) const;

 private:
  const MultiViewDataset* data_;
  ModelConfig model_;
  std::vector<FeatureMap> raw_geometry_;
  std::vector<FeatureMap> raw_texture_;
  std::unique_ptr<FrameState> frame_;
};

/// Number of fixed ray chunks whose gradient buffers are reduced in order;
/// independent of the worker count so results do not depend on scheduling.
inline constexpr int kGradientChunks = 16;

}  // namespace evr
