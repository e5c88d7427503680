#pragma once

#include "evr/grid.hpp"

namespace evr {

/// Reported for identical images, where the ratio is unbounded.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) for images in [0, 1], capped at kPsnrCap.
/// Throws ArgumentError on shape mismatch.
double psnr(const Image& a, const Image& b);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03
/// and unit dynamic range, computed per channel over every full window
/// position and averaged. Throws ArgumentError when a side is below 11.
double ssim(const Image& a, const Image& b);

}  // namespace evr
