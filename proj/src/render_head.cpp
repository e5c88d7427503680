#include "evr/render_head.hpp"

#include "evr/errors.hpp"

#include <algorithm>

namespace evr {

RenderHeadParams RenderHeadParams::pass_through(int channels) {
  RenderHeadParams p(channels);
  for (int c = 0; c < std::min(3, channels); ++c) p.weights[c * 3 + c] = 1.0;
  return p;
}

RenderHeadOutput render_head(const FeatureMap& features, const RenderHeadParams& params, int upsample) {
  if (features.channels() != params.in_channels) throw ArgumentError("render_head: channel mismatch");
  RenderHeadOutput out;
  out.low_res = Image(features.height(), features.width(), 3);
  const int ch = params.in_channels;
  for (size_t p = 0; p < features.pixel_count(); ++p) {
    const double* f = features.data().data() + p * ch;
    double* rgb = out.low_res.data().data() + p * 3;
    for (int k = 0; k < 3; ++k) rgb[k] = params.bias[k];
    for (int c = 0; c < ch; ++c) {
      const double x = f[c];
      rgb[0] += x * params.weights[c * 3 + 0];
      rgb[1] += x * params.weights[c * 3 + 1];
      rgb[2] += x * params.weights[c * 3 + 2];
    }
  }
  out.upsampled = bilinear_upsample(out.low_res, upsample);
  out.image = out.upsampled;
  for (double& v : out.image.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

RenderHeadGrads render_head_grad(const FeatureMap& features, const RenderHeadParams& params, int upsample,
                                 const RenderHeadOutput& forward, const Image& upstream) {
  if (!upstream.same_shape(forward.image)) throw ArgumentError("render_head_grad: upstream shape mismatch");
  Image g_up = upstream;
  for (size_t i = 0; i < g_up.size(); ++i) {
    const double v = forward.upsampled.data()[i];
    if (v < 0.0 || v > 1.0) g_up.data()[i] = 0.0;
  }
  Image g_low(forward.low_res.height(), forward.low_res.width(), 3);
  bilinear_upsample_grad(g_up, upsample, g_low);
  RenderHeadGrads g{RenderHeadParams(params.in_channels),
                    FeatureMap(features.height(), features.width(), features.channels())};
  const int ch = params.in_channels;
  for (size_t p = 0; p < features.pixel_count(); ++p) {
    const double* f = features.data().data() + p * ch;
    const double* gr = g_low.data().data() + p * 3;
    double* gf = g.features.data().data() + p * ch;
    for (int k = 0; k < 3; ++k) g.params.bias[k] += gr[k];
    for (int c = 0; c < ch; ++c) {
      for (int k = 0; k < 3; ++k) {
        g.params.weights[c * 3 + k] += f[c] * gr[k];
        gf[c] += params.weights[c * 3 + k] * gr[k];
      }
    }
  }
  return g;
}

}  // namespace evr
