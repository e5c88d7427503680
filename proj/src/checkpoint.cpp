#include "evr/checkpoint.hpp"

#include "evr/errors.hpp"
#include "evr/volume_io.hpp"

#include <algorithm>
#include <fstream>

namespace evr {

namespace {

constexpr int kCheckpointFormat = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "tensors", ec);
  if (ec) throw IoError("cannot create " + (dir / "tensors").string() + ": " + ec.message());
  ModelParams params = ck.params;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : tensors(params)) {
    const std::string file = "tensors/" + t.name + ".vgrd";
    VolumeGrid blob(1, 1, static_cast<int>(t.values.size()), 1);
    std::copy(t.values.begin(), t.values.end(), blob.data().begin());
    save_volume(dir / file, blob);
    list.push_back({{"name", t.name}, {"shape", t.shape}, {"file", file}});
  }
  const nlohmann::json manifest = {{"format", kCheckpointFormat},
                                   {"model", model_config_to_json(ck.model)},
                                   {"render", render_config_to_json(ck.render)},
                                   {"step", ck.step},
                                   {"seed", ck.seed},
                                   {"dataset", ck.dataset},
                                   {"train_views", ck.train_views},
                                   {"tensors", list}};
  const auto path = dir / "manifest.json";
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << manifest.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  Checkpoint ck;
  try {
    const nlohmann::json m = nlohmann::json::parse(f);
    if (m.at("format").get<int>() != kCheckpointFormat) throw IoError(path.string() + ": unsupported format");
    ck.model = model_config_from_json(m.at("model"));
    ck.render = render_config_from_json(m.at("render"));
    ck.step = m.value("step", int64_t{0});
    ck.seed = m.value("seed", uint64_t{0});
    ck.dataset = m.value("dataset", std::string());
    ck.train_views = m.value("train_views", std::vector<int>{});
    ck.params = ModelParams::initialize(ck.model, 0);
    auto refs = tensors(ck.params);
    for (const auto& entry : m.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      auto it = std::find_if(refs.begin(), refs.end(), [&](const TensorRef& r) { return r.name == name; });
      if (it == refs.end()) throw IoError(path.string() + ": unexpected tensor " + name);
      const VolumeGrid blob = load_volume(dir / entry.at("file").get<std::string>());
      if (blob.size() != it->values.size()) throw IoError(path.string() + ": tensor " + name + " has the wrong size");
      std::copy(blob.data().begin(), blob.data().end(), it->values.begin());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return ck;
}

std::filesystem::path checkpoint_dataset_path(const std::filesystem::path& dir, const Checkpoint& ck) {
  const std::filesystem::path p(ck.dataset);
  return p.is_absolute() ? p : dir / p;
}

}  // namespace evr
