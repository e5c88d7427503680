#include "evr/dataset.hpp"

#include "evr/errors.hpp"
#include "evr/image_io.hpp"
#include "evr/volume_io.hpp"

#include <cstdio>
#include <fstream>

namespace evr {

void MultiViewDataset::validate() const {
  if (cameras.size() != images.size()) throw ArgumentError("dataset: camera and image counts differ");
  if (cameras.size() < 2) throw ArgumentError("dataset: at least two views required");
  if (!(near > 0.0 && near < far)) throw ArgumentError("dataset: require 0 < near < far");
  for (size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.channels() != 3) throw ArgumentError("dataset: image " + std::to_string(i) + " is not RGB");
    if (img.width() != images[0].width() || img.height() != images[0].height()) {
      throw ArgumentError("dataset: images differ in size");
    }
    if (img.width() != cameras[i].width() || img.height() != cameras[i].height()) {
      throw ArgumentError("dataset: image " + std::to_string(i) + " does not match its camera size");
    }
  }
}

namespace {

std::string view_name(size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03zu.%s", i, ext);
  return buf;
}

VolumeGrid image_to_volume(const Image& img) {
  VolumeGrid v(img.height(), img.width(), 1, 3);
  v.data() = img.data();
  return v;
}

Image volume_to_image(const VolumeGrid& v) {
  Image img(v.height(), v.width(), 3);
  img.data() = v.data();
  return img;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const MultiViewDataset& data, bool float_sidecar) {
  data.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json views = nlohmann::json::array();
  for (size_t i = 0; i < data.size(); ++i) {
    nlohmann::json v = {{"image", view_name(i, "png")}, {"camera", camera_to_json(data.cameras[i])}};
    write_png(dir / view_name(i, "png"), data.images[i]);
    if (float_sidecar) {
      v["float"] = view_name(i, "vgrd");
      save_volume(dir / view_name(i, "vgrd"), image_to_volume(data.images[i]));
    }
    views.push_back(std::move(v));
  }
  const nlohmann::json manifest = {{"format", kManifestFormat},
                                   {"near", data.near},
                                   {"far", data.far},
                                   {"width", data.images[0].width()},
                                   {"height", data.images[0].height()},
                                   {"views", views},
                                   {"metadata", data.metadata}};
  const auto path = dir / "manifest.json";
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << manifest.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

MultiViewDataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  MultiViewDataset data;
  try {
    if (manifest.at("format").get<int>() != kManifestFormat) {
      throw IoError(path.string() + ": unsupported format " + manifest.at("format").dump());
    }
    data.near = manifest.at("near").get<double>();
    data.far = manifest.at("far").get<double>();
    if (manifest.contains("metadata")) data.metadata = manifest["metadata"];
    for (const auto& v : manifest.at("views")) {
      data.cameras.push_back(camera_from_json(v.at("camera")));
      if (v.contains("float")) {
        data.images.push_back(volume_to_image(load_volume(dir / v["float"].get<std::string>())));
      } else {
        data.images.push_back(read_png(dir / v.at("image").get<std::string>()));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    data.validate();
  } catch (const ArgumentError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return data;
}

}  // namespace evr
