#pragma once

#include "evr/params.hpp"
#include "evr/renderer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evr {

/// Fitted scene on disk: manifest.json (format, configs, tensor shapes) plus
/// one VGRD blob per tensor under tensors/.
struct Checkpoint {
  ModelConfig model;
  RenderConfig render;
  ModelParams params;
  int64_t step = 0;
  uint64_t seed = 0;
  std::string dataset;  // dataset directory, relative paths resolve against the checkpoint
  std::vector<int> train_views;  // views the fit used; empty means all of them
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
/// Throws IoError naming the manifest or blob on failure.
Checkpoint load_checkpoint(const std::filesystem::path& dir);
/// Dataset directory of a loaded checkpoint.
std::filesystem::path checkpoint_dataset_path(const std::filesystem::path& dir, const Checkpoint& checkpoint);

}  // namespace evr
