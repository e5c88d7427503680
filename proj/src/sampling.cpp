#include "evr/sampling.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace evr {

AxisStencil axis_stencil(double x, int n) {
  AxisStencil s;
  if (n <= 1) {
    s.degenerate = true;
    s.clamped = true;
    return s;
  }
  const double hi = static_cast<double>(n - 1);
  if (!(x >= 0.0)) {  // also catches NaN
    x = 0.0;
    s.clamped = true;
  } else if (x > hi) {
    x = hi;
    s.clamped = true;
  }
  s.i0 = std::min(static_cast<int>(std::floor(x)), n - 2);
  s.i1 = s.i0 + 1;
  s.t = x - s.i0;
  return s;
}

void bilinear_sample(const FeatureMap& map, double u, double v, std::span<double> out) {
  assert(out.size() == static_cast<size_t>(map.channels()));
  const AxisStencil sx = axis_stencil(u, map.width());
  const AxisStencil sy = axis_stencil(v, map.height());
  const double w00 = (1 - sx.t) * (1 - sy.t), w01 = sx.t * (1 - sy.t);
  const double w10 = (1 - sx.t) * sy.t, w11 = sx.t * sy.t;
  const auto p00 = map.pixel(sy.i0, sx.i0), p01 = map.pixel(sy.i0, sx.i1);
  const auto p10 = map.pixel(sy.i1, sx.i0), p11 = map.pixel(sy.i1, sx.i1);
  for (size_t c = 0; c < out.size(); ++c) {
    out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
  }
}

std::vector<double> bilinear_sample(const FeatureMap& map, double u, double v) {
  std::vector<double> out(map.channels());
  bilinear_sample(map, u, v, out);
  return out;
}

CoordGrad2 bilinear_sample_grad(const FeatureMap& map, double u, double v,
                                std::span<const double> upstream, FeatureMap* grad_map) {
  const AxisStencil sx = axis_stencil(u, map.width());
  const AxisStencil sy = axis_stencil(v, map.height());
  const double w00 = (1 - sx.t) * (1 - sy.t), w01 = sx.t * (1 - sy.t);
  const double w10 = (1 - sx.t) * sy.t, w11 = sx.t * sy.t;
  const auto p00 = map.pixel(sy.i0, sx.i0), p01 = map.pixel(sy.i0, sx.i1);
  const auto p10 = map.pixel(sy.i1, sx.i0), p11 = map.pixel(sy.i1, sx.i1);
  CoordGrad2 g;
  for (size_t c = 0; c < upstream.size(); ++c) {
    const double up = upstream[c];
    if (up == 0.0) continue;
    g.du += up * ((1 - sy.t) * (p01[c] - p00[c]) + sy.t * (p11[c] - p10[c]));
    g.dv += up * ((1 - sx.t) * (p10[c] - p00[c]) + sx.t * (p11[c] - p01[c]));
  }
  if (sx.clamped) g.du = 0.0;
  if (sy.clamped) g.dv = 0.0;
  if (grad_map != nullptr) {
    auto g00 = grad_map->pixel(sy.i0, sx.i0), g01 = grad_map->pixel(sy.i0, sx.i1);
    auto g10 = grad_map->pixel(sy.i1, sx.i0), g11 = grad_map->pixel(sy.i1, sx.i1);
    for (size_t c = 0; c < upstream.size(); ++c) {
      const double up = upstream[c];
      g00[c] += w00 * up;
      g01[c] += w01 * up;
      g10[c] += w10 * up;
      g11[c] += w11 * up;
    }
  }
  return g;
}

void bilinear_scatter(FeatureMap& grad_map, double u, double v, std::span<const double> upstream) {
  const AxisStencil sx = axis_stencil(u, grad_map.width());
  const AxisStencil sy = axis_stencil(v, grad_map.height());
  const double w00 = (1 - sx.t) * (1 - sy.t), w01 = sx.t * (1 - sy.t);
  const double w10 = (1 - sx.t) * sy.t, w11 = sx.t * sy.t;
  auto g00 = grad_map.pixel(sy.i0, sx.i0), g01 = grad_map.pixel(sy.i0, sx.i1);
  auto g10 = grad_map.pixel(sy.i1, sx.i0), g11 = grad_map.pixel(sy.i1, sx.i1);
  for (size_t c = 0; c < upstream.size(); ++c) {
    const double up = upstream[c];
    g00[c] += w00 * up;
    g01[c] += w01 * up;
    g10[c] += w10 * up;
    g11[c] += w11 * up;
  }
}

namespace {

struct TriStencil {
  AxisStencil x, y, z;
  size_t idx[8];
  double w[8];
};

TriStencil tri_stencil(const VolumeGrid& vol, double u, double v, double d) {
  TriStencil s;
  s.x = axis_stencil(u, vol.width());
  s.y = axis_stencil(v, vol.height());
  s.z = axis_stencil(d, vol.depth());
  int k = 0;
  for (int iy = 0; iy < 2; ++iy) {
    const int hy = iy ? s.y.i1 : s.y.i0;
    const double wy = iy ? s.y.t : 1 - s.y.t;
    for (int ix = 0; ix < 2; ++ix) {
      const int wx_i = ix ? s.x.i1 : s.x.i0;
      const double wx = ix ? s.x.t : 1 - s.x.t;
      for (int iz = 0; iz < 2; ++iz) {
        const int dz = iz ? s.z.i1 : s.z.i0;
        const double wz = iz ? s.z.t : 1 - s.z.t;
        s.idx[k] = vol.index(hy, wx_i, dz);
        s.w[k] = wy * wx * wz;
        ++k;
      }
    }
  }
  return s;
}

}  // namespace

void trilinear_sample(const VolumeGrid& vol, double u, double v, double d, std::span<double> out) {
  assert(out.size() == static_cast<size_t>(vol.channels()));
  const TriStencil s = tri_stencil(vol, u, v, d);
  const double* data = vol.data().data();
  for (size_t c = 0; c < out.size(); ++c) {
    double acc = 0.0;
    for (int k = 0; k < 8; ++k) acc += s.w[k] * data[s.idx[k] + c];
    out[c] = acc;
  }
}

std::vector<double> trilinear_sample(const VolumeGrid& vol, double u, double v, double d) {
  std::vector<double> out(vol.channels());
  trilinear_sample(vol, u, v, d, out);
  return out;
}

double trilinear_sample1(const VolumeGrid& vol, double u, double v, double d) {
  double out = 0.0;
  trilinear_sample(vol, u, v, d, std::span<double>(&out, 1));
  return out;
}

CoordGrad3 trilinear_sample_grad(const VolumeGrid& vol, double u, double v, double d,
                                 std::span<const double> upstream, VolumeGrid* grad_vol) {
  const TriStencil s = tri_stencil(vol, u, v, d);
  const double* data = vol.data().data();
  CoordGrad3 g;
  // Corner order is (y, x, z) with z fastest, matching tri_stencil.
  const double ty = s.y.t, tx = s.x.t, tz = s.z.t;
  for (size_t c = 0; c < upstream.size(); ++c) {
    const double up = upstream[c];
    if (up == 0.0) continue;
    double f[8];
    for (int k = 0; k < 8; ++k) f[k] = data[s.idx[k] + c];
    // f[(iy * 2 + ix) * 2 + iz]
    auto at = [&](int iy, int ix, int iz) { return f[(iy * 2 + ix) * 2 + iz]; };
    double dx = 0, dy = 0, dz = 0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double wa_y = a ? ty : 1 - ty;
        const double wb_z = b ? tz : 1 - tz;
        dx += wa_y * wb_z * (at(a, 1, b) - at(a, 0, b));
        const double wa_x = a ? tx : 1 - tx;
        dy += wa_x * wb_z * (at(1, a, b) - at(0, a, b));
        const double wb_y = b ? ty : 1 - ty;
        dz += wb_y * wa_x * (at(b, a, 1) - at(b, a, 0));
      }
    }
    g.du += up * dx;
    g.dv += up * dy;
    g.dd += up * dz;
  }
  if (s.x.clamped) g.du = 0.0;
  if (s.y.clamped) g.dv = 0.0;
  if (s.z.clamped) g.dd = 0.0;
  if (grad_vol != nullptr) {
    double* gd = grad_vol->data().data();
    for (size_t c = 0; c < upstream.size(); ++c) {
      const double up = upstream[c];
      if (up == 0.0) continue;
      for (int k = 0; k < 8; ++k) gd[s.idx[k] + c] += s.w[k] * up;
    }
  }
  return g;
}

CoordGrad3 trilinear_sample1_grad(const VolumeGrid& vol, double u, double v, double d,
                                  double upstream, VolumeGrid* grad_vol) {
  return trilinear_sample_grad(vol, u, v, d, std::span<const double>(&upstream, 1), grad_vol);
}

}  // namespace evr
