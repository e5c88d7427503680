#include "evr/features.hpp"

#include "evr/errors.hpp"

#include <algorithm>
#include <random>

namespace evr {

FeatureMap raw_features(const Image& image, int scale) {
  if (image.channels() != 3) throw ArgumentError("raw_features: image must have 3 channels");
  for (double v : image.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("raw_features: image values must lie in [0, 1]");
  }
  const FeatureMap small = area_downsample(image, scale);
  const int h = small.height(), w = small.width();
  std::vector<double> lum(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = small.pixel(y, x);
      lum[static_cast<size_t>(y) * w + x] = luminance(p[0], p[1], p[2]);
    }
  }
  auto L = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return lum[static_cast<size_t>(y) * w + x];
  };
  FeatureMap raw(h, w, kRawChannels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = small.pixel(y, x);
      auto r = raw.pixel(y, x);
      r[0] = p[0];
      r[1] = p[1];
      r[2] = p[2];
      r[3] = ((L(y - 1, x + 1) + 2 * L(y, x + 1) + L(y + 1, x + 1)) -
              (L(y - 1, x - 1) + 2 * L(y, x - 1) + L(y + 1, x - 1))) / 8.0;
      r[4] = ((L(y + 1, x - 1) + 2 * L(y + 1, x) + L(y + 1, x + 1)) -
              (L(y - 1, x - 1) + 2 * L(y - 1, x) + L(y - 1, x + 1))) / 8.0;
      double box = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) box += L(y + dy, x + dx);
      r[5] = box / 9.0;
    }
  }
  return raw;
}

FeatureMap LinearMix::apply(const FeatureMap& raw) const {
  if (raw.channels() != in_channels) throw ArgumentError("LinearMix: input channel mismatch");
  FeatureMap out(raw.height(), raw.width(), out_channels);
  for (size_t p = 0; p < raw.pixel_count(); ++p) {
    const double* in = raw.data().data() + p * in_channels;
    double* dst = out.data().data() + p * out_channels;
    for (int c = 0; c < out_channels; ++c) dst[c] = bias[c];
    for (int r = 0; r < in_channels; ++r) {
      const double x = in[r];
      const double* wrow = weights.data() + static_cast<size_t>(r) * out_channels;
      for (int c = 0; c < out_channels; ++c) dst[c] += x * wrow[c];
    }
  }
  return out;
}

void LinearMix::accumulate_grad(const FeatureMap& raw, const FeatureMap& upstream, LinearMix& grad) const {
  if (upstream.channels() != out_channels || upstream.pixel_count() != raw.pixel_count()) {
    throw ArgumentError("LinearMix: upstream shape mismatch");
  }
  for (size_t p = 0; p < raw.pixel_count(); ++p) {
    const double* in = raw.data().data() + p * in_channels;
    const double* up = upstream.data().data() + p * out_channels;
    for (int c = 0; c < out_channels; ++c) grad.bias[c] += up[c];
    for (int r = 0; r < in_channels; ++r) {
      const double x = in[r];
      if (x == 0.0) continue;
      double* grow = grad.weights.data() + static_cast<size_t>(r) * out_channels;
      for (int c = 0; c < out_channels; ++c) grow[c] += x * up[c];
    }
  }
}

FeatureExtractorParams FeatureExtractorParams::initialize(int geometry_channels, int texture_channels,
                                                          uint64_t seed) {
  FeatureExtractorParams p(geometry_channels, texture_channels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> geo(0.0, 0.5);
  std::normal_distribution<double> tex(0.0, 0.05);
  for (double& w : p.geometry.weights) w = geo(rng);
  for (double& w : p.texture.weights) w = tex(rng);
  for (int c = 0; c < std::min(3, texture_channels); ++c) p.texture.weights[c * texture_channels + c] += 1.0;
  return p;
}

ExtractedFeatures extract_features(const Image& image, const FeatureExtractorParams& params,
                                   FeatureScales scales) {
  return {params.geometry.apply(raw_features(image, scales.geometry)),
          params.texture.apply(raw_features(image, scales.texture))};
}

}  // namespace evr
