#pragma once

#include "evr/camera.hpp"
#include "evr/density_head.hpp"
#include "evr/features.hpp"
#include "evr/grid.hpp"
#include "evr/render_head.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evr {

struct Aabb {
  Vec3 min = Vec3::Constant(-1.0);
  Vec3 max = Vec3::Constant(1.0);
};

/// Free-form density offset on a world-space lattice spanning `bounds`
/// (nodes on the box corners). Sampled trilinearly; zero outside the box.
struct OffsetField {
  Aabb bounds;
  VolumeGrid values;  // rows along y, columns along x, depth along z; 1 channel

  OffsetField() = default;
  OffsetField(const Aabb& box, int resolution);

  bool locate(const Vec3& p, VoxelCoord& out) const;
  double sample(const Vec3& p) const;
  void sample_grad(const Vec3& p, double upstream, VolumeGrid& grad) const;
};

/// Shapes and architecture switches. Saved with checkpoints.
struct ModelConfig {
  int geometry_channels = 32;  // C_G
  int texture_channels = 16;   // C_T
  int geometry_scale = 16;     // geometry features and frustum grids at image / 16
  int texture_scale = 4;       // texture features at image / 4
  int planes = 64;             // depth planes per frustum grid
  bool fuse_mean = false;      // append the multi-view mean to the variance channels
  bool density_kernel = false;
  bool density_offset = false;
  int offset_resolution = 32;
  Aabb offset_bounds;
  double initial_density = 0.5;  // softplus(bias) at initialization

  FeatureScales scales() const { return {geometry_scale, texture_scale}; }
  int fused_channels() const { return fuse_mean ? 2 * geometry_channels : geometry_channels; }
  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Every trainable tensor of the pipeline.
struct ModelParams {
  FeatureExtractorParams extractor;
  DensityHeadParams density;
  RenderHeadParams head;
  std::optional<OffsetField> offset;

  static ModelParams initialize(const ModelConfig& config, uint64_t seed);
  /// Same shapes, all values zero.
  ModelParams zeros_like() const;
  void set_zero();
};

struct TensorRef {
  std::string name;
  std::vector<int> shape;
  std::span<double> values;
};

/// Named views of every tensor in a fixed order (used by the optimizer,
/// checkpoints and gradient checks).
std::vector<TensorRef> tensors(ModelParams& params);
size_t parameter_count(ModelParams& params);
/// Flat index across tensors() in order.
double& flat_parameter(ModelParams& params, size_t index);
std::vector<double> flatten(ModelParams& params);
/// Inverse of flatten(); throws ArgumentError on length mismatch.
void assign_flat(ModelParams& params, std::span<const double> values);

/// Trainable scene state: parameters, paired gradient buffers, step count.
struct SceneParams {
  ModelParams values;
  ModelParams grads;
  int64_t step = 0;

  SceneParams() = default;
  explicit SceneParams(ModelParams initial) : values(std::move(initial)), grads(values.zeros_like()) {}
  void zero_grad() { grads.set_zero(); }
  /// Throws NumericError naming the first tensor holding a non-finite value.
  void check_finite() const;
};

}  // namespace evr
