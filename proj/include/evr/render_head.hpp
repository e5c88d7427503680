#pragma once

#include "evr/grid.hpp"

#include <vector>

namespace evr {

/// Per-pixel affine map from texture features to RGB, followed by bilinear
/// upsampling and a clamp to [0, 1].
struct RenderHeadParams {
  int in_channels = 0;
  std::vector<double> weights;  // row-major in_channels x 3
  std::vector<double> bias;     // 3

  RenderHeadParams() = default;
  explicit RenderHeadParams(int channels) : in_channels(channels), weights(channels * 3, 0.0), bias(3, 0.0) {}

  /// First three feature channels pass through to RGB.
  static RenderHeadParams pass_through(int channels);
};

struct RenderHeadOutput {
  Image low_res;    // before upsampling
  Image upsampled;  // before clamping
  Image image;      // final, in [0, 1]
};

RenderHeadOutput render_head(const FeatureMap& features, const RenderHeadParams& params, int upsample);

struct RenderHeadGrads {
  RenderHeadParams params;
  FeatureMap features;
};

RenderHeadGrads render_head_grad(const FeatureMap& features, const RenderHeadParams& params, int upsample,
                                 const RenderHeadOutput& forward, const Image& upstream);

}  // namespace evr
