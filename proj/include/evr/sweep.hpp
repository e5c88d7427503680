#pragma once

#include "evr/camera.hpp"
#include "evr/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evr {

/// World points of every frustum voxel, in VolumeGrid voxel order (h, w, d).
std::vector<Vec3> build_frustum_points(const FrustumGrid& grid);

/// A view's feature map plus the downsample factor relating its pixels to
/// the view camera's image pixels.
struct FeatureView {
  const Camera* camera = nullptr;
  const FeatureMap* features = nullptr;
  int scale = 1;
};

/// Maps an image pixel coordinate to a feature map coordinate at `scale`.
inline double image_to_feature(double px, int scale) { return (px + 0.5) / scale - 0.5; }

struct SweptFeatures {
  std::vector<VolumeGrid> per_view;            // H x W x D x C each
  std::vector<std::vector<uint8_t>> valid;     // per view, per voxel; 0 = behind camera
};

/// Projects every frustum point into every view and bilinearly samples its
/// feature map. Points behind a view's camera get zeros and an invalid mark.
SweptFeatures sweep_features(const FrustumGrid& grid, std::span<const Vec3> points,
                             std::span<const FeatureView> views);

/// Adjoint of sweep_features with respect to the feature maps. grads[i]
/// must have the shape of views[i].features and receives accumulation.
void sweep_features_grad(std::span<const Vec3> points, std::span<const FeatureView> views,
                         const SweptFeatures& swept, std::span<const VolumeGrid> upstream,
                         std::span<FeatureMap> grads);

struct FusedVolume {
  VolumeGrid volume;           // C (variance) or 2C (variance, then mean) channels
  std::vector<uint8_t> valid;  // per voxel; 0 when fewer than two views were valid
};

/// Per voxel and channel population variance over valid views. With
/// `append_mean`, the mean over valid views follows the variance channels.
/// Voxels with fewer than two valid views get zeros and an invalid mark.
FusedVolume variance_fuse(std::span<const VolumeGrid> per_view,
                          std::span<const std::vector<uint8_t>> valid, bool append_mean = false);

/// Adjoint of variance_fuse. Returns per-view gradients.
std::vector<VolumeGrid> variance_fuse_grad(std::span<const VolumeGrid> per_view,
                                           std::span<const std::vector<uint8_t>> valid,
                                           const VolumeGrid& upstream, bool append_mean = false);

}  // namespace evr
