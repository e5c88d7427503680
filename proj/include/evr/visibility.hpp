#pragma once

#include "evr/camera.hpp"
#include "evr/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evr {

/// Upper bound applied to alpha before forming transmittance products, so
/// that 1 - alpha never reaches zero.
inline constexpr double kAlphaClamp = 1.0 - 1e-6;

/// Result of warping the novel view's density into an input view's frustum,
/// with the sampling coordinates retained for the adjoint pass.
struct ResampledDensity {
  VolumeGrid density;              // 1 channel, input-view frustum grid
  std::vector<VoxelCoord> coords;  // novel-view voxel coordinate per input voxel
  std::vector<uint8_t> inside;     // 0 where the voxel falls outside the novel frustum
};

ResampledDensity resample_density_traced(const VolumeGrid& novel_density, const FrustumGrid& novel_frustum,
                                         const FrustumGrid& input_frustum, int workers = 1);

/// Novel density resampled onto the input frustum's voxels; zero where an
/// input voxel lies outside the novel frustum.
inline VolumeGrid resample_density(const VolumeGrid& novel_density, const FrustumGrid& novel_frustum,
                                   const FrustumGrid& input_frustum) {
  return resample_density_traced(novel_density, novel_frustum, input_frustum).density;
}

void resample_density_grad(const ResampledDensity& resampled, const VolumeGrid& novel_density,
                           const VolumeGrid& upstream, VolumeGrid& grad_novel_density);

/// Path length through one depth-plane interval along voxel column (u, v),
/// i.e. spacing * |ray direction with unit camera z|.
double plane_path_length(const FrustumGrid& frustum, int u, int v);

/// alpha = 1 - exp(-sigma * plane_path_length). On the optical axis the path
/// length equals the plane spacing (t_f - t_n) / D.
/// Throws ArgumentError on negative density.
VolumeGrid alpha_volume(const VolumeGrid& density, const FrustumGrid& frustum);
VolumeGrid alpha_volume_grad(const VolumeGrid& density, const FrustumGrid& frustum,
                             const VolumeGrid& upstream);

/// Front-to-back transmittance per column: vis(0) = 1,
/// vis(d) = prod_{j < d} (1 - min(alpha(j), kAlphaClamp)).
VolumeGrid visibility_volume(const VolumeGrid& alpha);
VolumeGrid visibility_volume_grad(const VolumeGrid& alpha, const VolumeGrid& visibility,
                                  const VolumeGrid& upstream);

/// Alpha and visibility volumes of one input view, derived from the novel
/// view's density volume.
struct ViewVisibility {
  int view_index = 0;
  FrustumGrid frustum;
  ResampledDensity resampled;
  VolumeGrid alpha;
  VolumeGrid visibility;
};

ViewVisibility build_view_visibility(int view_index, const VolumeGrid& novel_density,
                                     const FrustumGrid& novel_frustum, const FrustumGrid& input_frustum,
                                     int workers = 1);

/// Visibility of world point p from a view: the trilinearly sampled
/// visibility volume, or 0 when p lies outside the view's frustum.
double point_visibility(const Vec3& p, const ViewVisibility& view);
std::vector<double> point_visibility(const Vec3& p, std::span<const ViewVisibility> views);

/// Adjoint of point_visibility for one view. Accumulates into grad_visibility
/// (may be null) and returns upstream * dv/dp.
Vec3 point_visibility_grad(const Vec3& p, const ViewVisibility& view, double upstream,
                           VolumeGrid* grad_visibility);

/// Chains a visibility-volume gradient back to the novel density volume
/// through the transmittance product, the alpha map and the resampling.
void view_visibility_grad(const ViewVisibility& view, const VolumeGrid& novel_density,
                          const VolumeGrid& grad_visibility, VolumeGrid& grad_novel_density);

/// End-to-end gradient of sum_i upstream[i] * point_visibility(p, views[i])
/// with respect to the novel density volume.
VolumeGrid visibility_grad(const Vec3& p, std::span<const ViewVisibility> views,
                           const VolumeGrid& novel_density, std::span<const double> upstream);

}  // namespace evr
