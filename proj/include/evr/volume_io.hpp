#pragma once

#include "evr/grid.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace evr {

/// VGRD volume files: the 4-byte magic "VGRD", then u32 H, W, D, C
/// (little-endian), then H*W*D*C little-endian float32 values in VolumeGrid
/// layout order. The header is 20 bytes including the magic.
void write_volume(std::ostream& out, const VolumeGrid& grid);
VolumeGrid read_volume(std::istream& in);

void save_volume(const std::filesystem::path& path, const VolumeGrid& grid);
/// Throws IoError naming the path on missing or malformed files.
VolumeGrid load_volume(const std::filesystem::path& path);

}  // namespace evr
