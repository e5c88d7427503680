#pragma once

#include "evr/grid.hpp"

#include <span>
#include <vector>

namespace evr {

/// Interpolation stencil along one axis of length n. Coordinates are clamped
/// to [0, n - 1]; `clamped` records that clamping changed the coordinate, in
/// which case the coordinate derivative is zero.
struct AxisStencil {
  int i0 = 0;
  int i1 = 0;
  double t = 0.0;
  bool clamped = false;
  bool degenerate = false;  // n == 1: no coordinate dependence
};

AxisStencil axis_stencil(double x, int n);

struct CoordGrad2 {
  double du = 0.0;
  double dv = 0.0;
};

struct CoordGrad3 {
  double du = 0.0;
  double dv = 0.0;
  double dd = 0.0;
};

/// Bilinear interpolation at column u, row v; writes map.channels() values.
void bilinear_sample(const FeatureMap& map, double u, double v, std::span<double> out);
std::vector<double> bilinear_sample(const FeatureMap& map, double u, double v);

/// Adjoint of bilinear_sample. Accumulates d(out)/d(map) * upstream into
/// grad_map (same shape as map, may be null) and returns d(out . upstream)/d(u, v).
CoordGrad2 bilinear_sample_grad(const FeatureMap& map, double u, double v,
                                std::span<const double> upstream, FeatureMap* grad_map);

/// Accumulates the bilinear weights of (u, v) times upstream into grad_map,
/// without computing coordinate derivatives.
void bilinear_scatter(FeatureMap& grad_map, double u, double v, std::span<const double> upstream);

/// Trilinear interpolation at (u: width, v: height, d: depth).
void trilinear_sample(const VolumeGrid& vol, double u, double v, double d, std::span<double> out);
std::vector<double> trilinear_sample(const VolumeGrid& vol, double u, double v, double d);
/// Single-channel convenience overload.
double trilinear_sample1(const VolumeGrid& vol, double u, double v, double d);

CoordGrad3 trilinear_sample_grad(const VolumeGrid& vol, double u, double v, double d,
                                 std::span<const double> upstream, VolumeGrid* grad_vol);
CoordGrad3 trilinear_sample1_grad(const VolumeGrid& vol, double u, double v, double d,
                                  double upstream, VolumeGrid* grad_vol);

}  // namespace evr
