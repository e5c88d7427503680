#pragma once

#include "evr/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evr {

/// Raw per-pixel channels: R, G, B, horizontal Sobel of luminance, vertical
/// Sobel of luminance, 3x3 box-mean luminance.
inline constexpr int kRawChannels = 6;

/// Raw channels of `image` after block-averaging it by `scale`. Sobel
/// responses are normalized by 1/8 and borders replicate edge pixels.
/// Throws ArgumentError if any image value is outside [0, 1].
FeatureMap raw_features(const Image& image, int scale);

/// Rec. 601 luma weights.
inline double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

/// Affine per-pixel channel mixing out = raw * weights + bias. `weights` is
/// row-major raw_channels x out_channels.
struct LinearMix {
  int in_channels = kRawChannels;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  LinearMix() = default;
  LinearMix(int in, int out) : in_channels(in), out_channels(out), weights(in * out, 0.0), bias(out, 0.0) {}

  FeatureMap apply(const FeatureMap& raw) const;
  /// Accumulates parameter gradients for upstream = dL/d(apply(raw)).
  void accumulate_grad(const FeatureMap& raw, const FeatureMap& upstream, LinearMix& grad) const;
};

/// Parametric stand-in for the shared image encoder: two linear heads over
/// the fixed raw channels, one for geometry features and one for texture.
struct FeatureExtractorParams {
  LinearMix geometry;
  LinearMix texture;

  FeatureExtractorParams() = default;
  FeatureExtractorParams(int geometry_channels, int texture_channels)
      : geometry(kRawChannels, geometry_channels), texture(kRawChannels, texture_channels) {}

  /// Seeded initialization: small random geometry mixing, texture mixing that
  /// passes RGB through its first three channels plus small random terms.
  static FeatureExtractorParams initialize(int geometry_channels, int texture_channels, uint64_t seed);
};

struct FeatureScales {
  int geometry = 16;
  int texture = 4;
};

struct ExtractedFeatures {
  FeatureMap geometry;  // F^G at image / scales.geometry
  FeatureMap texture;   // F^T at image / scales.texture
};

ExtractedFeatures extract_features(const Image& image, const FeatureExtractorParams& params,
                                   FeatureScales scales);

}  // namespace evr
