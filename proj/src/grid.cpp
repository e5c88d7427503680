#include "evr/grid.hpp"

#include "evr/errors.hpp"
#include "evr/sampling.hpp"

#include <algorithm>

namespace evr {

VolumeGrid::VolumeGrid(int height, int width, int depth, int channels, double fill)
    : h_(height), w_(width), d_(depth), c_(channels) {
  if (height < 1 || width < 1 || depth < 1 || channels < 1) {
    throw ArgumentError("VolumeGrid: all dimensions must be >= 1");
  }
  data_.assign(static_cast<size_t>(height) * width * depth * channels, fill);
}

void VolumeGrid::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

FeatureMap::FeatureMap(int height, int width, int channels, double fill)
    : h_(height), w_(width), c_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ArgumentError("FeatureMap: all dimensions must be >= 1");
  }
  data_.assign(static_cast<size_t>(height) * width * channels, fill);
}

void FeatureMap::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

FeatureMap area_downsample(const FeatureMap& src, int factor) {
  if (factor < 1) throw ArgumentError("area_downsample: factor must be >= 1");
  if (factor == 1) return src;
  const int h = src.height() / factor;
  const int w = src.width() / factor;
  if (h < 1 || w < 1) throw ArgumentError("area_downsample: factor larger than image");
  FeatureMap out(h, w, src.channels());
  const double norm = 1.0 / (static_cast<double>(factor) * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto dst = out.pixel(y, x);
      for (int sy = 0; sy < factor; ++sy) {
        for (int sx = 0; sx < factor; ++sx) {
          const auto p = src.pixel(y * factor + sy, x * factor + sx);
          for (int c = 0; c < src.channels(); ++c) dst[c] += p[c];
        }
      }
      for (int c = 0; c < src.channels(); ++c) dst[c] *= norm;
    }
  }
  return out;
}

FeatureMap bilinear_upsample(const FeatureMap& src, int factor) {
  if (factor < 1) throw ArgumentError("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return src;
  FeatureMap out(src.height() * factor, src.width() * factor, src.channels());
  for (int y = 0; y < out.height(); ++y) {
    const double sv = (y + 0.5) / factor - 0.5;
    for (int x = 0; x < out.width(); ++x) {
      const double su = (x + 0.5) / factor - 0.5;
      bilinear_sample(src, su, sv, out.pixel(y, x));
    }
  }
  return out;
}

void bilinear_upsample_grad(const FeatureMap& upstream, int factor, FeatureMap& grad_src) {
  if (upstream.height() != grad_src.height() * factor || upstream.width() != grad_src.width() * factor ||
      upstream.channels() != grad_src.channels()) {
    throw ArgumentError("bilinear_upsample_grad: shape mismatch");
  }
  if (factor == 1) {
    for (size_t i = 0; i < upstream.size(); ++i) grad_src.data()[i] += upstream.data()[i];
    return;
  }
  for (int y = 0; y < upstream.height(); ++y) {
    const double sv = (y + 0.5) / factor - 0.5;
    for (int x = 0; x < upstream.width(); ++x) {
      const double su = (x + 0.5) / factor - 0.5;
      bilinear_scatter(grad_src, su, sv, upstream.pixel(y, x));
    }
  }
}

}  // namespace evr
