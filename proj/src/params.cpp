#include "evr/params.hpp"

#include "evr/errors.hpp"
#include "evr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evr {

OffsetField::OffsetField(const Aabb& box, int resolution) : bounds(box) {
  if (resolution < 2) throw ArgumentError("OffsetField: resolution must be >= 2");
  for (int k = 0; k < 3; ++k) {
    if (!(box.max[k] > box.min[k])) throw ArgumentError("OffsetField: empty bounds");
  }
  values = VolumeGrid(resolution, resolution, resolution, 1);
}

bool OffsetField::locate(const Vec3& p, VoxelCoord& out) const {
  const double n = values.width() - 1;
  const Vec3 extent = bounds.max - bounds.min;
  out.u = (p.x() - bounds.min.x()) / extent.x() * n;
  out.v = (p.y() - bounds.min.y()) / extent.y() * n;
  out.d = (p.z() - bounds.min.z()) / extent.z() * n;
  return out.u >= 0.0 && out.u <= n && out.v >= 0.0 && out.v <= n && out.d >= 0.0 && out.d <= n;
}

double OffsetField::sample(const Vec3& p) const {
  VoxelCoord c;
  if (!locate(p, c)) return 0.0;
  return trilinear_sample1(values, c.u, c.v, c.d);
}

void OffsetField::sample_grad(const Vec3& p, double upstream, VolumeGrid& grad) const {
  VoxelCoord c;
  if (upstream == 0.0 || !locate(p, c)) return;
  trilinear_sample1_grad(values, c.u, c.v, c.d, upstream, &grad);
}

void ModelConfig::validate() const {
  if (geometry_channels < 1 || texture_channels < 1) throw ConfigError("model: channel counts must be >= 1");
  if (geometry_scale < 1 || texture_scale < 1) throw ConfigError("model: scales must be >= 1");
  if (planes < 2) throw ConfigError("model.planes: must be >= 2");
  if (!(initial_density > 0.0)) throw ConfigError("model.initial_density: must be > 0");
  if (density_offset) {
    if (offset_resolution < 2) throw ConfigError("model.offset_resolution: must be >= 2");
    for (int k = 0; k < 3; ++k) {
      if (!(offset_bounds.max[k] > offset_bounds.min[k])) throw ConfigError("model.offset_bounds: empty box");
    }
  }
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string("model.") + field + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"geometry_channels", c.geometry_channels},
          {"texture_channels", c.texture_channels},
          {"geometry_scale", c.geometry_scale},
          {"texture_scale", c.texture_scale},
          {"planes", c.planes},
          {"fuse_mean", c.fuse_mean},
          {"density_kernel", c.density_kernel},
          {"density_offset", c.density_offset},
          {"offset_resolution", c.offset_resolution},
          {"offset_min", vec_json(c.offset_bounds.min)},
          {"offset_max", vec_json(c.offset_bounds.max)},
          {"initial_density", c.initial_density}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  ModelConfig c;
  try {
    c.geometry_channels = j.value("geometry_channels", c.geometry_channels);
    c.texture_channels = j.value("texture_channels", c.texture_channels);
    c.geometry_scale = j.value("geometry_scale", c.geometry_scale);
    c.texture_scale = j.value("texture_scale", c.texture_scale);
    c.planes = j.value("planes", c.planes);
    c.fuse_mean = j.value("fuse_mean", c.fuse_mean);
    c.density_kernel = j.value("density_kernel", c.density_kernel);
    c.density_offset = j.value("density_offset", c.density_offset);
    c.offset_resolution = j.value("offset_resolution", c.offset_resolution);
    c.initial_density = j.value("initial_density", c.initial_density);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (j.contains("offset_min")) c.offset_bounds.min = vec_from(j["offset_min"], "offset_min");
  if (j.contains("offset_max")) c.offset_bounds.max = vec_from(j["offset_max"], "offset_max");
  c.validate();
  return c;
}

ModelParams ModelParams::initialize(const ModelConfig& config, uint64_t seed) {
  config.validate();
  ModelParams p;
  p.extractor = FeatureExtractorParams::initialize(config.geometry_channels, config.texture_channels, seed);
  p.density = DensityHeadParams(config.fused_channels(), config.density_kernel);
  p.density.bias = std::log(std::expm1(config.initial_density));  // inverse softplus
  p.head = RenderHeadParams::pass_through(config.texture_channels);
  if (config.density_offset) p.offset = OffsetField(config.offset_bounds, config.offset_resolution);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.set_zero();
  return z;
}

void ModelParams::set_zero() {
  for (auto& t : tensors(*this)) std::fill(t.values.begin(), t.values.end(), 0.0);
}

std::vector<TensorRef> tensors(ModelParams& p) {
  std::vector<TensorRef> out;
  auto add = [&](std::string name, std::vector<int> shape, std::vector<double>& v) {
    out.push_back({std::move(name), std::move(shape), std::span<double>(v)});
  };
  auto& g = p.extractor.geometry;
  auto& t = p.extractor.texture;
  add("extractor.geometry.weights", {g.in_channels, g.out_channels}, g.weights);
  add("extractor.geometry.bias", {g.out_channels}, g.bias);
  add("extractor.texture.weights", {t.in_channels, t.out_channels}, t.weights);
  add("extractor.texture.bias", {t.out_channels}, t.bias);
  add("density.weights", {static_cast<int>(p.density.weights.size())}, p.density.weights);
  out.push_back({"density.bias", {1}, std::span<double>(&p.density.bias, 1)});
  if (p.density.has_kernel()) add("density.kernel", {3, 3, 3}, p.density.kernel);
  add("head.weights", {p.head.in_channels, 3}, p.head.weights);
  add("head.bias", {3}, p.head.bias);
  if (p.offset) {
    auto& v = p.offset->values;
    add("offset", {v.height(), v.width(), v.depth()}, v.data());
  }
  return out;
}

size_t parameter_count(ModelParams& params) {
  size_t n = 0;
  for (const auto& t : tensors(params)) n += t.values.size();
  return n;
}

double& flat_parameter(ModelParams& params, size_t index) {
  for (auto& t : tensors(params)) {
    if (index < t.values.size()) return t.values[index];
    index -= t.values.size();
  }
  throw RangeError("flat_parameter: index out of range");
}

std::vector<double> flatten(ModelParams& params) {
  std::vector<double> out;
  for (const auto& t : tensors(params)) out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

void assign_flat(ModelParams& params, std::span<const double> values) {
  if (values.size() != parameter_count(params)) throw ArgumentError("assign_flat: length mismatch");
  size_t k = 0;
  for (auto& t : tensors(params)) {
    std::copy_n(values.begin() + k, t.values.size(), t.values.begin());
    k += t.values.size();
  }
}

void SceneParams::check_finite() const {
  auto& self = const_cast<SceneParams&>(*this);
  for (auto* block : {&self.values, &self.grads}) {
    for (const auto& t : tensors(*block)) {
      for (double v : t.values) {
        if (!std::isfinite(v)) {
          throw NumericError(std::string(block == &self.values ? "parameter " : "gradient ") + t.name +
                             " holds a non-finite value");
        }
      }
    }
  }
}

}  // namespace evr
