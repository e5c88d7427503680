#pragma once

#include "evr/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evr {

/// 8-bit RGB PNG encoding of an image in [0, 1] (values are clamped, then
/// rounded to the nearest level).
std::vector<uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<uint8_t>& bytes);

void write_png(const std::filesystem::path& path, const Image& image);
/// Throws IoError naming the path. Gray and alpha inputs are converted to RGB.
Image read_png(const std::filesystem::path& path);

/// Maps a single-channel field to RGB with a blue-to-yellow ramp over [lo, hi].
Image heatmap(const FeatureMap& field, double lo, double hi);

}  // namespace evr
