#pragma once

#include "evr/grid.hpp"

namespace evr {

/// Default weight of the perceptual term in the total loss.
inline constexpr double kPerceptualWeight = 0.1;

/// Mean squared error over all pixels and channels. Throws ArgumentError on
/// shape mismatch.
double mean_squared_error(const Image& a, const Image& b);
/// d mean_squared_error / d a.
Image mean_squared_error_grad(const Image& a, const Image& b);

/// Loss of the final high-resolution render against the target image.
inline double loss_render(const Image& rendered, const Image& target) { return mean_squared_error(rendered, target); }
/// Loss of the low-resolution integrated color image against the target
/// downsampled to the same resolution.
inline double loss_inter(const Image& inter, const Image& target_low) { return mean_squared_error(inter, target_low); }

/// render + inter + lambda * perceptual. The perceptual term is not computed
/// by this library and is zero unless the caller supplies it.
double loss_total(double render, double inter, double perceptual = 0.0, double lambda = kPerceptualWeight);

}  // namespace evr
