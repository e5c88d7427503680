#include "evr/density_head.hpp"

#include "evr/errors.hpp"

#include <cmath>

namespace evr {

DensityHeadParams::DensityHeadParams(int channels, bool with_kernel) : weights(channels, 0.0) {
  if (with_kernel) {
    kernel.assign(27, 0.0);
    kernel[13] = 1.0;  // identity tap
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

VolumeGrid linear_preactivation(const VolumeGrid& features, const DensityHeadParams& params) {
  const int c = features.channels();
  VolumeGrid a0(features.height(), features.width(), features.depth(), 1);
  for (size_t i = 0; i < a0.voxel_count(); ++i) {
    const double* f = features.data().data() + i * c;
    double acc = params.bias;
    for (int k = 0; k < c; ++k) acc += params.weights[k] * f[k];
    a0.data()[i] = acc;
  }
  return a0;
}

// out(x) += sum_k kernel[k] * in(x + o_k), zero outside the grid. With
// `transpose`, applies the adjoint: out(x + o_k) += kernel[k] * in(x).
void convolve3(const VolumeGrid& in, const std::vector<double>& kernel, VolumeGrid& out, bool transpose) {
  const int H = in.height(), W = in.width(), D = in.depth();
  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) {
      for (int d = 0; d < D; ++d) {
        const double x = in.at(h, w, d);
        double acc = 0.0;
        for (int dh = -1; dh <= 1; ++dh) {
          const int hh = h + dh;
          if (hh < 0 || hh >= H) continue;
          for (int dw = -1; dw <= 1; ++dw) {
            const int ww = w + dw;
            if (ww < 0 || ww >= W) continue;
            for (int dd = -1; dd <= 1; ++dd) {
              const int d2 = d + dd;
              if (d2 < 0 || d2 >= D) continue;
              const double k = kernel[((dh + 1) * 3 + (dw + 1)) * 3 + (dd + 1)];
              if (transpose) {
                out.at(hh, ww, d2) += k * x;
              } else {
                acc += k * in.at(hh, ww, d2);
              }
            }
          }
        }
        if (!transpose) out.at(h, w, d) += acc;
      }
    }
  }
}

}  // namespace

DensityHeadOutput density_head(const VolumeGrid& features, const DensityHeadParams& params,
                               const VolumeGrid* offset) {
  if (static_cast<int>(params.weights.size()) != features.channels()) {
    throw ArgumentError("density_head: weight count does not match feature channels");
  }
  if (params.has_kernel() && params.kernel.size() != 27) {
    throw ArgumentError("density_head: smoothing kernel must have 27 taps");
  }
  VolumeGrid a0 = linear_preactivation(features, params);
  VolumeGrid a;
  if (params.has_kernel()) {
    a = VolumeGrid(a0.height(), a0.width(), a0.depth(), 1);
    convolve3(a0, params.kernel, a, false);
  } else {
    a = std::move(a0);
  }
  if (offset != nullptr) {
    if (offset->voxel_count() != a.voxel_count() || offset->channels() != 1) {
      throw ArgumentError("density_head: offset volume shape mismatch");
    }
    for (size_t i = 0; i < a.size(); ++i) a.data()[i] += offset->data()[i];
  }
  DensityHeadOutput out{VolumeGrid(a.height(), a.width(), a.depth(), 1), std::move(a)};
  for (size_t i = 0; i < out.density.size(); ++i) out.density.data()[i] = softplus(out.preactivation.data()[i]);
  return out;
}

DensityHeadGrads density_head_grad(const VolumeGrid& features, const DensityHeadParams& params,
                                   const DensityHeadOutput& forward, const VolumeGrid& upstream) {
  if (upstream.voxel_count() != forward.density.voxel_count()) {
    throw ArgumentError("density_head_grad: upstream shape mismatch");
  }
  const int c = features.channels();
  DensityHeadGrads g;
  g.params = DensityHeadParams(c, params.has_kernel());
  if (params.has_kernel()) std::fill(g.params.kernel.begin(), g.params.kernel.end(), 0.0);
  g.preactivation = VolumeGrid(upstream.height(), upstream.width(), upstream.depth(), 1);
  for (size_t i = 0; i < upstream.size(); ++i) {
    g.preactivation.data()[i] = upstream.data()[i] * sigmoid(forward.preactivation.data()[i]);
  }
  VolumeGrid g0;
  if (params.has_kernel()) {
    const VolumeGrid a0 = linear_preactivation(features, params);
    g0 = VolumeGrid(a0.height(), a0.width(), a0.depth(), 1);
    convolve3(g.preactivation, params.kernel, g0, true);
    const int H = a0.height(), W = a0.width(), D = a0.depth();
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        for (int d = 0; d < D; ++d) {
          const double ga = g.preactivation.at(h, w, d);
          if (ga == 0.0) continue;
          for (int dh = -1; dh <= 1; ++dh)
            for (int dw = -1; dw <= 1; ++dw)
              for (int dd = -1; dd <= 1; ++dd) {
                const int hh = h + dh, ww = w + dw, d2 = d + dd;
                if (hh < 0 || hh >= H || ww < 0 || ww >= W || d2 < 0 || d2 >= D) continue;
                g.params.kernel[((dh + 1) * 3 + (dw + 1)) * 3 + (dd + 1)] += ga * a0.at(hh, ww, d2);
              }
        }
  } else {
    g0 = g.preactivation;
  }
  g.features = VolumeGrid(features.height(), features.width(), features.depth(), c);
  for (size_t i = 0; i < g0.voxel_count(); ++i) {
    const double ga = g0.data()[i];
    g.params.bias += ga;
    if (ga == 0.0) continue;
    const double* f = features.data().data() + i * c;
    double* gf = g.features.data().data() + i * c;
    for (int k = 0; k < c; ++k) {
      g.params.weights[k] += ga * f[k];
      gf[k] = ga * params.weights[k];
    }
  }
  return g;
}

}  // namespace evr
