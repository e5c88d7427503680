#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evr {

/// Dense H x W x D x C grid. Layout: channel innermost, then depth, then
/// width, then height: index = ((h * W + w) * D + d) * C + c.
class VolumeGrid {
 public:
  VolumeGrid() = default;
  VolumeGrid(int height, int width, int depth, int channels, double fill = 0.0);

  int height() const { return h_; }
  int width() const { return w_; }
  int depth() const { return d_; }
  int channels() const { return c_; }
  size_t voxel_count() const { return static_cast<size_t>(h_) * w_ * d_; }
  size_t size() const { return data_.size(); }

  size_t index(int h, int w, int d, int c = 0) const {
    return ((static_cast<size_t>(h) * w_ + w) * d_ + d) * c_ + c;
  }
  double& at(int h, int w, int d, int c = 0) { return data_[index(h, w, d, c)]; }
  double at(int h, int w, int d, int c = 0) const { return data_[index(h, w, d, c)]; }

  std::span<double> voxel(int h, int w, int d) { return {data_.data() + index(h, w, d), static_cast<size_t>(c_)}; }
  std::span<const double> voxel(int h, int w, int d) const {
    return {data_.data() + index(h, w, d), static_cast<size_t>(c_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const VolumeGrid& o) const {
    return h_ == o.h_ && w_ == o.w_ && d_ == o.d_ && c_ == o.c_;
  }
  void fill(double value);

 private:
  int h_ = 0, w_ = 0, d_ = 0, c_ = 0;
  std::vector<double> data_;
};

/// Dense H x W x C image or feature map, index = (y * W + x) * C + c.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels, double fill = 0.0);

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  size_t pixel_count() const { return static_cast<size_t>(h_) * w_; }
  size_t size() const { return data_.size(); }

  size_t index(int y, int x, int c = 0) const {
    return (static_cast<size_t>(y) * w_ + x) * c_ + c;
  }
  double& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<double> pixel(int y, int x) { return {data_.data() + index(y, x), static_cast<size_t>(c_)}; }
  std::span<const double> pixel(int y, int x) const {
    return {data_.data() + index(y, x), static_cast<size_t>(c_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const FeatureMap& o) const { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }
  void fill(double value);

 private:
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<double> data_;
};

/// RGB images are three-channel feature maps with values in [0, 1].
using Image = FeatureMap;

/// Block-average downsample by an integer factor; output is floor(H / f) x floor(W / f).
FeatureMap area_downsample(const FeatureMap& src, int factor);

/// Bilinear upsample by an integer factor. Output pixel X samples source
/// coordinate (X + 0.5) / f - 0.5 with edge clamping.
FeatureMap bilinear_upsample(const FeatureMap& src, int factor);
/// Adjoint of bilinear_upsample: accumulates into a source-shaped gradient.
void bilinear_upsample_grad(const FeatureMap& upstream, int factor, FeatureMap& grad_src);

}  // namespace evr
