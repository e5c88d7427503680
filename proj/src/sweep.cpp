#include "evr/sweep.hpp"

#include "evr/errors.hpp"
#include "evr/sampling.hpp"

namespace evr {

std::vector<Vec3> build_frustum_points(const FrustumGrid& grid) {
  std::vector<Vec3> points;
  points.reserve(static_cast<size_t>(grid.grid_h()) * grid.grid_w() * grid.depth());
  for (int h = 0; h < grid.grid_h(); ++h) {
    for (int w = 0; w < grid.grid_w(); ++w) {
      for (int d = 0; d < grid.depth(); ++d) points.push_back(grid.voxel_point(w, h, d));
    }
  }
  return points;
}

SweptFeatures sweep_features(const FrustumGrid& grid, std::span<const Vec3> points,
                             std::span<const FeatureView> views) {
  if (views.empty()) throw ArgumentError("sweep_features: at least one view required");
  const size_t expected = static_cast<size_t>(grid.grid_h()) * grid.grid_w() * grid.depth();
  if (points.size() != expected) throw ArgumentError("sweep_features: point count does not match grid");
  SweptFeatures out;
  for (const FeatureView& view : views) {
    const int channels = view.features->channels();
    VolumeGrid vol(grid.grid_h(), grid.grid_w(), grid.depth(), channels);
    std::vector<uint8_t> valid(points.size(), 0);
    for (size_t i = 0; i < points.size(); ++i) {
      PixelDepth px;
      if (!view.camera->try_project(points[i], px)) continue;
      valid[i] = 1;
      bilinear_sample(*view.features, image_to_feature(px.u, view.scale),
                      image_to_feature(px.v, view.scale),
                      std::span<double>(vol.data().data() + i * channels, channels));
    }
    out.per_view.push_back(std::move(vol));
    out.valid.push_back(std::move(valid));
  }
  return out;
}

void sweep_features_grad(std::span<const Vec3> points, std::span<const FeatureView> views,
                         const SweptFeatures& swept, std::span<const VolumeGrid> upstream,
                         std::span<FeatureMap> grads) {
  for (size_t v = 0; v < views.size(); ++v) {
    const FeatureView& view = views[v];
    const int channels = view.features->channels();
    for (size_t i = 0; i < points.size(); ++i) {
      if (!swept.valid[v][i]) continue;
      const PixelDepth px = view.camera->project(points[i]);
      bilinear_scatter(grads[v], image_to_feature(px.u, view.scale), image_to_feature(px.v, view.scale),
                       std::span<const double>(upstream[v].data().data() + i * channels, channels));
    }
  }
}

FusedVolume variance_fuse(std::span<const VolumeGrid> per_view,
                          std::span<const std::vector<uint8_t>> valid, bool append_mean) {
  if (per_view.size() < 2) throw ArgumentError("variance_fuse: at least two views required");
  if (valid.size() != per_view.size()) throw ArgumentError("variance_fuse: mask count mismatch");
  const VolumeGrid& first = per_view.front();
  for (const auto& v : per_view) {
    if (!v.same_shape(first)) throw ArgumentError("variance_fuse: volume shape mismatch");
  }
  for (const auto& m : valid) {
    if (m.size() != first.voxel_count()) throw ArgumentError("variance_fuse: mask shape mismatch");
  }
  const int c = first.channels();
  const int out_c = append_mean ? 2 * c : c;
  FusedVolume out{VolumeGrid(first.height(), first.width(), first.depth(), out_c),
                  std::vector<uint8_t>(first.voxel_count(), 0)};
  std::vector<double> mean(c);
  for (size_t i = 0; i < first.voxel_count(); ++i) {
    int m = 0;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (size_t v = 0; v < per_view.size(); ++v) {
      if (!valid[v][i]) continue;
      ++m;
      const double* f = per_view[v].data().data() + i * c;
      for (int k = 0; k < c; ++k) mean[k] += f[k];
    }
    if (m < 2) continue;
    out.valid[i] = 1;
    for (int k = 0; k < c; ++k) mean[k] /= m;
    double* dst = out.volume.data().data() + i * out_c;
    for (size_t v = 0; v < per_view.size(); ++v) {
      if (!valid[v][i]) continue;
      const double* f = per_view[v].data().data() + i * c;
      for (int k = 0; k < c; ++k) {
        const double e = f[k] - mean[k];
        dst[k] += e * e;
      }
    }
    for (int k = 0; k < c; ++k) dst[k] /= m;
    if (append_mean) {
      for (int k = 0; k < c; ++k) dst[c + k] = mean[k];
    }
  }
  return out;
}

std::vector<VolumeGrid> variance_fuse_grad(std::span<const VolumeGrid> per_view,
                                           std::span<const std::vector<uint8_t>> valid,
                                           const VolumeGrid& upstream, bool append_mean) {
  const VolumeGrid& first = per_view.front();
  const int c = first.channels();
  const int out_c = append_mean ? 2 * c : c;
  if (upstream.channels() != out_c || upstream.voxel_count() != first.voxel_count()) {
    throw ArgumentError("variance_fuse_grad: upstream shape mismatch");
  }
  std::vector<VolumeGrid> grads;
  for (const auto& v : per_view) grads.emplace_back(v.height(), v.width(), v.depth(), c);
  std::vector<double> mean(c);
  for (size_t i = 0; i < first.voxel_count(); ++i) {
    int m = 0;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (size_t v = 0; v < per_view.size(); ++v) {
      if (!valid[v][i]) continue;
      ++m;
      const double* f = per_view[v].data().data() + i * c;
      for (int k = 0; k < c; ++k) mean[k] += f[k];
    }
    if (m < 2) continue;
    for (int k = 0; k < c; ++k) mean[k] /= m;
    const double* up = upstream.data().data() + i * out_c;
    for (size_t v = 0; v < per_view.size(); ++v) {
      if (!valid[v][i]) continue;
      const double* f = per_view[v].data().data() + i * c;
      double* g = grads[v].data().data() + i * c;
      // d var / d f_v = 2 (f_v - mean) / M; the mean's own dependence cancels.
      for (int k = 0; k < c; ++k) {
        g[k] += up[k] * 2.0 * (f[k] - mean[k]) / m;
        if (append_mean) g[k] += up[c + k] / m;
      }
    }
  }
  return grads;
}

}  // namespace evr
