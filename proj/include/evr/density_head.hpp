#pragma once

#include "evr/grid.hpp"

#include <vector>

namespace evr {

/// Per-voxel density regression: softplus(conv3(w . f + b) + offset), where
/// the 3x3x3 kernel is optional and zero-padded and the offset volume is an
/// optional additive pre-activation term.
struct DensityHeadParams {
  std::vector<double> weights;  // one per input channel
  double bias = 0.0;
  std::vector<double> kernel;   // empty, or 27 values indexed ((dh + 1) * 3 + (dw + 1)) * 3 + (dd + 1)

  DensityHeadParams() = default;
  explicit DensityHeadParams(int channels, bool with_kernel = false);

  bool has_kernel() const { return !kernel.empty(); }
};

double softplus(double x);
double sigmoid(double x);

struct DensityHeadOutput {
  VolumeGrid density;         // 1 channel, >= 0
  VolumeGrid preactivation;   // 1 channel, before softplus
};

/// `offset` may be null; otherwise a 1-channel volume matching the grid.
DensityHeadOutput density_head(const VolumeGrid& features, const DensityHeadParams& params,
                               const VolumeGrid* offset = nullptr);

struct DensityHeadGrads {
  DensityHeadParams params;   // weights/bias/kernel gradients
  VolumeGrid features;        // dL/dV_G
  VolumeGrid preactivation;   // dL/d(final pre-activation), also the offset gradient
};

DensityHeadGrads density_head_grad(const VolumeGrid& features, const DensityHeadParams& params,
                                   const DensityHeadOutput& forward, const VolumeGrid& upstream);

}  // namespace evr
