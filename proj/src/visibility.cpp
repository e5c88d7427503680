#include "evr/visibility.hpp"

#include "evr/errors.hpp"
#include "evr/parallel.hpp"
#include "evr/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace evr {

ResampledDensity resample_density_traced(const VolumeGrid& novel_density, const FrustumGrid& novel_frustum,
                                         const FrustumGrid& input_frustum, int workers) {
  const int H = input_frustum.grid_h(), W = input_frustum.grid_w(), D = input_frustum.depth();
  ResampledDensity out{VolumeGrid(H, W, D, 1), std::vector<VoxelCoord>(static_cast<size_t>(H) * W * D),
                       std::vector<uint8_t>(static_cast<size_t>(H) * W * D, 0)};
  parallel_for(0, H, workers, [&](int h) {
    for (int w = 0; w < W; ++w) {
      for (int d = 0; d < D; ++d) {
        const size_t i = out.density.index(h, w, d);
        const Vec3 p = input_frustum.voxel_point(w, h, d);
        VoxelCoord c;
        if (!novel_frustum.locate(p, c)) continue;
        out.inside[i] = 1;
        out.coords[i] = c;
        out.density.data()[i] = trilinear_sample1(novel_density, c.u, c.v, c.d);
      }
    }
  });
  return out;
}

void resample_density_grad(const ResampledDensity& resampled, const VolumeGrid& novel_density,
                           const VolumeGrid& upstream, VolumeGrid& grad_novel_density) {
  for (size_t i = 0; i < resampled.inside.size(); ++i) {
    if (!resampled.inside[i]) continue;
    const double g = upstream.data()[i];
    if (g == 0.0) continue;
    const VoxelCoord& c = resampled.coords[i];
    trilinear_sample1_grad(novel_density, c.u, c.v, c.d, g, &grad_novel_density);
  }
}

double plane_path_length(const FrustumGrid& frustum, int u, int v) {
  const Camera& cam = frustum.camera();
  const double x = (frustum.column_to_pixel(u) - cam.cx()) / cam.fx();
  const double y = (frustum.row_to_pixel(v) - cam.cy()) / cam.fy();
  return frustum.planes().spacing() * std::sqrt(1.0 + x * x + y * y);
}

VolumeGrid alpha_volume(const VolumeGrid& density, const FrustumGrid& frustum) {
  if (density.channels() != 1) throw ArgumentError("alpha_volume: density must have one channel");
  VolumeGrid alpha(density.height(), density.width(), density.depth(), 1);
  for (int h = 0; h < density.height(); ++h) {
    for (int w = 0; w < density.width(); ++w) {
      const double len = plane_path_length(frustum, w, h);
      for (int d = 0; d < density.depth(); ++d) {
        const double sigma = density.at(h, w, d);
        if (!(sigma >= 0.0)) throw ArgumentError("alpha_volume: density must be non-negative");
        alpha.at(h, w, d) = -std::expm1(-sigma * len);
      }
    }
  }
  return alpha;
}

VolumeGrid alpha_volume_grad(const VolumeGrid& density, const FrustumGrid& frustum, const VolumeGrid& upstream) {
  VolumeGrid grad(density.height(), density.width(), density.depth(), 1);
  for (int h = 0; h < density.height(); ++h) {
    for (int w = 0; w < density.width(); ++w) {
      const double len = plane_path_length(frustum, w, h);
      for (int d = 0; d < density.depth(); ++d) {
        grad.at(h, w, d) = upstream.at(h, w, d) * len * std::exp(-density.at(h, w, d) * len);
      }
    }
  }
  return grad;
}

VolumeGrid visibility_volume(const VolumeGrid& alpha) {
  VolumeGrid vis(alpha.height(), alpha.width(), alpha.depth(), 1);
  for (int h = 0; h < alpha.height(); ++h) {
    for (int w = 0; w < alpha.width(); ++w) {
      double t = 1.0;
      for (int d = 0; d < alpha.depth(); ++d) {
        vis.at(h, w, d) = t;
        t *= 1.0 - std::min(alpha.at(h, w, d), kAlphaClamp);
      }
    }
  }
  return vis;
}

VolumeGrid visibility_volume_grad(const VolumeGrid& alpha, const VolumeGrid& visibility,
                                  const VolumeGrid& upstream) {
  VolumeGrid grad(alpha.height(), alpha.width(), alpha.depth(), 1);
  for (int h = 0; h < alpha.height(); ++h) {
    for (int w = 0; w < alpha.width(); ++w) {
      double suffix = 0.0;  // sum_{d > j} g_d vis(d)
      for (int j = alpha.depth() - 1; j >= 0; --j) {
        const double a = alpha.at(h, w, j);
        if (a < kAlphaClamp) grad.at(h, w, j) = -suffix / (1.0 - a);
        suffix += upstream.at(h, w, j) * visibility.at(h, w, j);
      }
    }
  }
  return grad;
}

ViewVisibility build_view_visibility(int view_index, const VolumeGrid& novel_density,
                                     const FrustumGrid& novel_frustum, const FrustumGrid& input_frustum,
                                     int workers) {
  ViewVisibility v;
  v.view_index = view_index;
  v.frustum = input_frustum;
  v.resampled = resample_density_traced(novel_density, novel_frustum, input_frustum, workers);
  v.alpha = alpha_volume(v.resampled.density, input_frustum);
  v.visibility = visibility_volume(v.alpha);
  return v;
}

double point_visibility(const Vec3& p, const ViewVisibility& view) {
  VoxelCoord c;
  if (!view.frustum.locate(p, c)) return 0.0;
  return std::clamp(trilinear_sample1(view.visibility, c.u, c.v, c.d), 0.0, 1.0);
}

std::vector<double> point_visibility(const Vec3& p, std::span<const ViewVisibility> views) {
  std::vector<double> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(point_visibility(p, v));
  return out;
}

Vec3 point_visibility_grad(const Vec3& p, const ViewVisibility& view, double upstream,
                           VolumeGrid* grad_visibility) {
  VoxelCoord c;
  if (upstream == 0.0 || !view.frustum.locate(p, c)) return Vec3::Zero();
  const CoordGrad3 g = trilinear_sample1_grad(view.visibility, c.u, c.v, c.d, upstream, grad_visibility);
  return view.frustum.locate_jacobian(p).transpose() * Vec3(g.du, g.dv, g.dd);
}

void view_visibility_grad(const ViewVisibility& view, const VolumeGrid& novel_density,
                          const VolumeGrid& grad_visibility, VolumeGrid& grad_novel_density) {
  const VolumeGrid grad_alpha = visibility_volume_grad(view.alpha, view.visibility, grad_visibility);
  const VolumeGrid grad_density = alpha_volume_grad(view.resampled.density, view.frustum, grad_alpha);
  resample_density_grad(view.resampled, novel_density, grad_density, grad_novel_density);
}

VolumeGrid visibility_grad(const Vec3& p, std::span<const ViewVisibility> views,
                           const VolumeGrid& novel_density, std::span<const double> upstream) {
  if (upstream.size() != views.size()) throw ArgumentError("visibility_grad: upstream size mismatch");
  VolumeGrid grad(novel_density.height(), novel_density.width(), novel_density.depth(), 1);
  for (size_t i = 0; i < views.size(); ++i) {
    const ViewVisibility& v = views[i];
    VolumeGrid grad_vis(v.visibility.height(), v.visibility.width(), v.visibility.depth(), 1);
    point_visibility_grad(p, v, upstream[i], &grad_vis);
    view_visibility_grad(v, novel_density, grad_vis, grad);
  }
  return grad;
}

}  // namespace evr
