#include "evr/synthetic.hpp"

#include "evr/errors.hpp"
#include "evr/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace evr {

namespace {

double soft_step(double sd, double softness) {
  if (softness <= 0.0) return sd <= 0.0 ? 1.0 : 0.0;
  // C1 smoothstep from 1 at sd = -softness to 0 at sd = +softness; compact support
  const double x = std::clamp(0.5 - 0.5 * sd / softness, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

void plane_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  t1 = (helper - n * n.dot(helper)).normalized();
  t2 = n.cross(t1);
}

}  // namespace

Vec3 Texture::eval(const Vec3& c) const {
  switch (kind) {
    case Kind::solid:
      return a;
    case Kind::checker: {
      const long parity = static_cast<long>(std::floor(c.x() / period)) + static_cast<long>(std::floor(c.y() / period)) +
                          static_cast<long>(std::floor(c.z() / period));
      return (parity % 2 == 0) ? a : b;
    }
    case Kind::sine: {
      const double w = 2.0 * std::numbers::pi / period;
      const double m = 0.5 + 0.5 * std::sin(w * c.x()) * std::cos(w * c.y() * 0.7 + 0.3) * std::cos(w * c.z() * 0.5);
      return a + (b - a) * m;
    }
  }
  return a;
}

double Primitive::signed_distance(const Vec3& p) const {
  switch (kind) {
    case Kind::slab: {
      const Vec3 c = 0.5 * (min + max), h = 0.5 * (max - min);
      const Vec3 q = (p - c).cwiseAbs() - h;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case Kind::sphere:
      return (p - center).norm() - radius;
    case Kind::checker_plane:
      return std::abs(normal.normalized().dot(p - center)) - 0.5 * thickness;
  }
  return 1.0;
}

double Primitive::sigma(const Vec3& p) const { return density * soft_step(signed_distance(p), softness); }

Vec3 Primitive::color(const Vec3& p) const {
  if (kind == Kind::checker_plane) {
    Vec3 t1, t2;
    const Vec3 n = normal.normalized();
    plane_basis(n, t1, t2);
    const Vec3 d = p - center;
    return texture.eval(Vec3(d.dot(t1), d.dot(t2), 0.0));
  }
  return texture.eval(p);
}

double RingRig::focal() const { return 0.5 * width / std::tan(0.5 * deg(fov_deg)); }

Camera RingRig::camera_at(double azimuth_deg, double elev_deg) const {
  const double a = deg(azimuth_deg), e = deg(elev_deg);
  const Vec3 offset(radius * std::cos(e) * std::sin(a), -radius * std::sin(e), -radius * std::cos(e) * std::cos(a));
  const double f = focal();
  return Camera::look_at(target + offset, target, f, f, width, height);
}

Camera RingRig::camera(int k) const {
  if (arc_deg >= 360.0) return camera_at(360.0 * k / count, elevation_deg);
  return camera_at(-0.5 * arc_deg + arc_deg * k / (count - 1), elevation_deg);
}

double SyntheticScene::sigma(const Vec3& p) const {
  double s = 0.0;
  for (const auto& prim : primitives) s += prim.sigma(p);
  return s;
}

Vec3 SyntheticScene::color(const Vec3& p) const {
  Vec3 acc = Vec3::Zero();
  double total = 0.0;
  for (const auto& prim : primitives) {
    const double s = prim.sigma(p);
    if (s <= 0.0) continue;
    acc += s * prim.color(p);
    total += s;
  }
  return total > 0.0 ? Vec3(acc / total) : Vec3::Zero();
}

std::vector<Camera> SyntheticScene::cameras() const {
  std::vector<Camera> out;
  for (int k = 0; k < rig.count; ++k) out.push_back(rig.camera(k));
  return out;
}

namespace {

Vec3 read_vec(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
    throw ConfigError(field + ": expected 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const nlohmann::json& required(const nlohmann::json& j, const char* key, const std::string& field) {
  if (!j.contains(key)) throw ConfigError(field + "." + key + ": missing");
  return j[key];
}

double read_number(const nlohmann::json& j, const char* key, const std::string& field) {
  const auto& v = required(j, key, field);
  if (!v.is_number()) throw ConfigError(field + "." + key + ": must be a number");
  return v.get<double>();
}

Texture read_texture(const nlohmann::json& j, const std::string& field) {
  Texture t;
  const std::string kind = j.value("type", std::string("solid"));
  if (kind == "solid") {
    t.kind = Texture::Kind::solid;
    if (j.contains("color")) t.a = read_vec(j["color"], field + ".color");
  } else if (kind == "checker" || kind == "sine") {
    t.kind = kind == "checker" ? Texture::Kind::checker : Texture::Kind::sine;
    if (j.contains("colors")) {
      const auto& c = j["colors"];
      if (!c.is_array() || c.size() != 2) throw ConfigError(field + ".colors: expected two colors");
      t.a = read_vec(c[0], field + ".colors[0]");
      t.b = read_vec(c[1], field + ".colors[1]");
    }
    t.period = j.value("period", t.period);
    if (!(t.period > 0.0)) throw ConfigError(field + ".period: must be positive");
  } else {
    throw ConfigError(field + ".type: unknown texture \"" + kind + "\"");
  }
  for (int k = 0; k < 3; ++k) {
    if (t.a[k] < 0.0 || t.a[k] > 1.0 || t.b[k] < 0.0 || t.b[k] > 1.0) {
      throw ConfigError(field + ": colors must lie in [0, 1]");
    }
  }
  return t;
}

Primitive read_primitive(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field + ": expected an object");
  Primitive p;
  const std::string kind = j.value("type", std::string());
  if (kind == "slab") {
    p.kind = Primitive::Kind::slab;
    p.min = read_vec(required(j, "min", field), field + ".min");
    p.max = read_vec(required(j, "max", field), field + ".max");
    if (!(p.max.array() > p.min.array()).all()) throw ConfigError(field + ": max must exceed min");
  } else if (kind == "sphere") {
    p.kind = Primitive::Kind::sphere;
    p.center = read_vec(required(j, "center", field), field + ".center");
    p.radius = read_number(j, "radius", field);
    if (!(p.radius > 0.0)) throw ConfigError(field + ".radius: must be positive");
  } else if (kind == "checker_plane") {
    p.kind = Primitive::Kind::checker_plane;
    p.center = read_vec(required(j, "point", field), field + ".point");
    p.normal = read_vec(j.value("normal", nlohmann::json{0, 0, 1}), field + ".normal");
    if (!(p.normal.norm() > 0.0)) throw ConfigError(field + ".normal: must be non-zero");
    p.thickness = j.value("thickness", p.thickness);
    if (!(p.thickness > 0.0)) throw ConfigError(field + ".thickness: must be positive");
    p.texture.kind = Texture::Kind::checker;
    p.texture.a = Vec3(0.9, 0.9, 0.9);
    p.texture.b = Vec3(0.1, 0.1, 0.1);
    p.texture.period = j.value("period", 0.25);
  } else {
    throw ConfigError(field + ".type: unknown primitive \"" + kind + "\"");
  }
  p.density = j.value("density", p.density);
  p.softness = j.value("softness", p.softness);
  if (!(p.density >= 0.0)) throw ConfigError(field + ".density: must be non-negative");
  if (!(p.softness >= 0.0)) throw ConfigError(field + ".softness: must be non-negative");
  if (j.contains("texture")) p.texture = read_texture(j["texture"], field + ".texture");
  return p;
}

Vec3 anchor(const Primitive& p) { return p.kind == Primitive::Kind::slab ? Vec3(0.5 * (p.min + p.max)) : p.center; }

}  // namespace

SyntheticScene generate_scene(const nlohmann::json& spec, uint64_t seed) {
  if (!spec.is_object()) throw ConfigError("scene: expected a JSON object");
  SyntheticScene scene;
  scene.spec = spec;
  scene.seed = seed;
  try {
    if (spec.contains("rig")) {
      const auto& r = spec["rig"];
      RingRig& rig = scene.rig;
      rig.count = r.value("count", rig.count);
      rig.radius = r.value("radius", rig.radius);
      rig.elevation_deg = r.value("elevation_deg", rig.elevation_deg);
      rig.arc_deg = r.value("arc_deg", rig.arc_deg);
      rig.width = r.value("width", rig.width);
      rig.height = r.value("height", rig.height);
      rig.fov_deg = r.value("fov_deg", rig.fov_deg);
      rig.near = r.value("near", rig.radius - 2.0);
      rig.far = r.value("far", rig.radius + 2.0);
      if (r.contains("target")) rig.target = read_vec(r["target"], "rig.target");
    }
    const RingRig& rig = scene.rig;
    if (rig.count < 2) throw ConfigError("rig.count: must be >= 2");
    if (!(rig.arc_deg > 0.0 && rig.arc_deg <= 360.0)) throw ConfigError("rig.arc_deg: must lie in (0, 360]");
    if (!(rig.radius > 0.0)) throw ConfigError("rig.radius: must be positive");
    if (rig.width < 1 || rig.height < 1) throw ConfigError("rig: image size must be positive");
    if (!(rig.fov_deg > 0.0 && rig.fov_deg < 180.0)) throw ConfigError("rig.fov_deg: must lie in (0, 180)");
    if (!(rig.near > 0.0 && rig.near < rig.far)) throw ConfigError("rig: require 0 < near < far");

    if (spec.contains("primitives")) {
      const auto& list = spec["primitives"];
      if (!list.is_array()) throw ConfigError("primitives: expected an array");
      for (size_t i = 0; i < list.size(); ++i) {
        scene.primitives.push_back(read_primitive(list[i], "primitives[" + std::to_string(i) + "]"));
      }
    }
    const int random_count = spec.value("random_primitives", 0);
    if (random_count < 0) throw ConfigError("random_primitives: must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double spread = spec.value("random_spread", 0.25 * rig.radius);
    const double softness = spec.value("random_softness", 0.05);
    const double mean_size = spec.value("random_size", 0.15 * rig.radius);
    const auto density_range = spec.value("random_density", std::vector<double>{10.0, 40.0});
    if (density_range.size() != 2 || density_range[0] < 0.0 || density_range[1] < density_range[0]) {
      throw ConfigError("random_density: expected [lo, hi] with 0 <= lo <= hi");
    }
    if (!(mean_size > 0.0)) throw ConfigError("random_size: must be > 0");
    for (int i = 0; i < random_count; ++i) {
      Primitive p;
      const Vec3 c = rig.target + spread * Vec3(2 * unit(rng) - 1, 2 * unit(rng) - 1, 2 * unit(rng) - 1);
      const double size = mean_size * (0.5 + unit(rng));
      if (unit(rng) < 0.5) {
        p.kind = Primitive::Kind::sphere;
        p.center = c;
        p.radius = 0.5 * size;
      } else {
        p.kind = Primitive::Kind::slab;
        const Vec3 half = 0.5 * size * Vec3(0.4 + unit(rng), 0.4 + unit(rng), 0.4 + unit(rng));
        p.min = c - half;
        p.max = c + half;
      }
      p.density = density_range[0] + (density_range[1] - density_range[0]) * unit(rng);
      p.softness = softness;
      p.texture.kind = Texture::Kind::solid;
      p.texture.a = Vec3(unit(rng), unit(rng), unit(rng));
      scene.primitives.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }

  if (!scene.primitives.empty()) {
    const RingRig& rig = scene.rig;
    for (int k = 0; k < rig.count; ++k) {
      const Camera cam = rig.camera(k);
      const bool seen = std::any_of(scene.primitives.begin(), scene.primitives.end(), [&](const Primitive& p) {
        PixelDepth px;
        return cam.try_project(anchor(p), px) && px.u >= 0 && px.u <= cam.width() - 1 && px.v >= 0 &&
               px.v <= cam.height() - 1 && px.z >= rig.near && px.z <= rig.far;
      });
      if (!seen) throw ConfigError("scene: camera " + std::to_string(k) + " sees no primitive");
    }
  }
  return scene;
}

OracleImage oracle_render(const SyntheticScene& scene, const Camera& camera, double near, double far, double step) {
  if (!(step > 0.0)) throw ArgumentError("oracle_render: step must be positive");
  if (!(near > 0.0 && near < far)) throw ArgumentError("oracle_render: require 0 < near < far");
  const int W = camera.width(), H = camera.height();
  OracleImage out{Image(H, W, 3), FeatureMap(H, W, 1), FeatureMap(H, W, 1)};
  const int n = std::max(1, static_cast<int>(std::ceil((far - near) / step)));
  const double dt = (far - near) / n;
  const Vec3 origin = camera.center();
  parallel_for(0, H, 0, [&](int y) {
    for (int x = 0; x < W; ++x) {
      const Vec3 dir = camera.ray_direction(x, y);
      const double len = dir.norm() * dt;
      double T = 1.0, depth = 0.0;
      Vec3 rgb = Vec3::Zero();
      for (int k = 0; k < n && T > 1e-12; ++k) {
        const double t = near + (k + 0.5) * dt;
        const Vec3 p = origin + t * dir;
        const double s = scene.sigma(p);
        if (s <= 0.0) continue;
        const double a = -std::expm1(-s * len);
        const double w = T * a;
        rgb += w * scene.color(p);
        depth += w * t;
        T *= 1.0 - a;
      }
      for (int c = 0; c < 3; ++c) out.rgb.at(y, x, c) = std::clamp(rgb[c], 0.0, 1.0);
      out.depth.at(y, x) = depth;
      out.transmittance.at(y, x) = T;
    }
  });
  return out;
}

double oracle_point_visibility(const SyntheticScene& scene, const Camera& camera, const Vec3& p, double step) {
  if (!(step > 0.0)) throw ArgumentError("oracle_point_visibility: step must be positive");
  camera.project(p);  // throws BehindCameraError
  const Vec3 origin = camera.center();
  const double L = (p - origin).norm();
  const Vec3 dir = (p - origin) / L;
  // cells anchored at the camera, so moving p outward only appends optical depth
  const int full = static_cast<int>(std::floor(L / step));
  double optical = 0.0;
  for (int k = 0; k < full; ++k) optical += scene.sigma(origin + dir * ((k + 0.5) * step)) * step;
  const double rest = L - full * step;
  if (rest > 0.0) optical += scene.sigma(origin + dir * ((full + 0.5) * step)) * rest;
  return std::exp(-optical);
}

MultiViewDataset make_dataset(const SyntheticScene& scene, double step) {
  MultiViewDataset data;
  data.near = scene.rig.near;
  data.far = scene.rig.far;
  for (int k = 0; k < scene.rig.count; ++k) {
    const Camera cam = scene.rig.camera(k);
    data.cameras.push_back(cam);
    data.images.push_back(oracle_render(scene, cam, data.near, data.far, step).rgb);
  }
  data.metadata = {{"generator", "synthetic"}, {"seed", scene.seed}, {"spec", scene.spec}, {"step", step}};
  return data;
}

nlohmann::json demo_scene_spec(int width, int height) {
  return {{"rig", {{"count", 6}, {"radius", 4.0}, {"elevation_deg", 10.0}, {"arc_deg", 90.0},
                   {"width", width}, {"height", height}, {"fov_deg", 40.0}}},
          {"primitives",
           {{{"type", "slab"}, {"min", {-0.45, -0.45, -0.6}}, {"max", {0.45, 0.45, -0.2}}, {"density", 40.0},
             {"texture", {{"type", "sine"}, {"colors", {{0.9, 0.3, 0.1}, {0.95, 0.85, 0.2}}}, {"period", 0.8}}}},
            {{"type", "checker_plane"}, {"point", {0.0, 0.0, 0.6}}, {"normal", {0.0, 0.0, 1.0}},
             {"thickness", 0.2}, {"density", 40.0},
             {"texture", {{"type", "checker"}, {"colors", {{0.15, 0.3, 0.8}, {0.85, 0.9, 0.95}}}, {"period", 0.5}}}}}}};
}

}  // namespace evr
