#include "evr/volume_io.hpp"

#include "evr/errors.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace evr {

namespace {

constexpr std::array<char, 4> kMagic{'V', 'G', 'R', 'D'};

void put_u32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("VGRD: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_volume(std::ostream& out, const VolumeGrid& grid) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<uint32_t>(grid.height()));
  put_u32(out, static_cast<uint32_t>(grid.width()));
  put_u32(out, static_cast<uint32_t>(grid.depth()));
  put_u32(out, static_cast<uint32_t>(grid.channels()));
  for (double v : grid.data()) put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError("VGRD: write failed");
}

VolumeGrid read_volume(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("VGRD: bad magic");
  const uint32_t h = get_u32(in), w = get_u32(in), d = get_u32(in), c = get_u32(in);
  if (h == 0 || w == 0 || d == 0 || c == 0) throw IoError("VGRD: zero dimension");
  const uint64_t count = static_cast<uint64_t>(h) * w * d * c;
  if (count > (uint64_t{1} << 32)) throw IoError("VGRD: volume too large");
  VolumeGrid grid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d), static_cast<int>(c));
  std::vector<unsigned char> raw(count * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("VGRD: truncated data");
  }
  for (uint64_t i = 0; i < count; ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                          (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    grid.data()[i] = std::bit_cast<float>(bits);
  }
  return grid;
}

void save_volume(const std::filesystem::path& path, const VolumeGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  try {
    write_volume(out, grid);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

VolumeGrid load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  try {
    return read_volume(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace evr
