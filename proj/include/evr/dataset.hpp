#pragma once

#include "evr/camera.hpp"
#include "evr/grid.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace evr {

/// Calibrated multi-view images sharing one frustum depth range.
struct MultiViewDataset {
  std::vector<Camera> cameras;
  std::vector<Image> images;
  double near = 1.0;
  double far = 2.0;
  nlohmann::json metadata = nlohmann::json::object();

  size_t size() const { return cameras.size(); }
  /// Throws ArgumentError when counts, sizes or bounds are inconsistent.
  void validate() const;
};

/// Directory layout: manifest.json plus one 8-bit PNG per view. With
/// `float_sidecar`, each view also gets a raw float32 copy (VGRD, H x W x 1 x 3)
/// that load_dataset prefers over the PNG.
void save_dataset(const std::filesystem::path& dir, const MultiViewDataset& data, bool float_sidecar = false);
/// Throws IoError naming the manifest or image file on failure.
MultiViewDataset load_dataset(const std::filesystem::path& dir);

inline constexpr int kManifestFormat = 1;

}  // namespace evr
