#pragma once

#include "evr/camera.hpp"
#include "evr/dataset.hpp"
#include "evr/grid.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace evr {

/// Color pattern evaluated on a primitive's texture coordinates.
struct Texture {
  enum class Kind { solid, checker, sine };
  Kind kind = Kind::solid;
  Vec3 a = Vec3::Constant(0.8);
  Vec3 b = Vec3::Constant(0.2);
  double period = 0.5;

  Vec3 eval(const Vec3& coords) const;
};

struct Primitive {
  enum class Kind { slab, sphere, checker_plane };
  Kind kind = Kind::slab;
  Vec3 min = Vec3::Constant(-0.5);  // slab
  Vec3 max = Vec3::Constant(0.5);
  Vec3 center = Vec3::Zero();       // sphere center, or a point on the plane
  double radius = 0.5;
  Vec3 normal = Vec3::UnitZ();      // checker plane
  double thickness = 0.1;
  double density = 50.0;            // peak density
  double softness = 0.0;            // half-width of the smoothstep edge; 0 gives a hard boundary
  Texture texture;

  /// Signed distance to the surface, negative inside.
  double signed_distance(const Vec3& p) const;
  double sigma(const Vec3& p) const;
  Vec3 color(const Vec3& p) const;
};

/// Ring of cameras around `target`, all looking at it.
struct RingRig {
  int count = 8;
  double radius = 4.0;
  double elevation_deg = 0.0;
  double arc_deg = 360.0;  // azimuth span; below 360 the cameras spread evenly over [-arc/2, arc/2]
  Vec3 target = Vec3::Zero();
  int width = 64;
  int height = 64;
  double fov_deg = 40.0;
  double near = 2.0;
  double far = 6.0;

  Camera camera(int k) const;
  /// Camera on the same ring at an arbitrary azimuth (degrees from view 0).
  Camera camera_at(double azimuth_deg, double elevation_deg) const;
  double focal() const;
};

struct SyntheticScene {
  std::vector<Primitive> primitives;
  RingRig rig;
  nlohmann::json spec;
  uint64_t seed = 0;

  double sigma(const Vec3& p) const;
  /// Density-weighted primitive color; zero where there is no density.
  Vec3 color(const Vec3& p) const;
  std::vector<Camera> cameras() const;
};

/// Builds a scene from a JSON description (rig, primitives, optional
/// "random_primitives" count drawn from `seed`). Throws ConfigError on a
/// malformed spec or when some camera sees no primitive.
SyntheticScene generate_scene(const nlohmann::json& spec, uint64_t seed);

/// Small two-object scene (textured slab in front of a checker plane) on a
/// 6-camera ring; used by `bench` and the demo commands.
nlohmann::json demo_scene_spec(int width = 64, int height = 64);

struct OracleImage {
  Image rgb;
  FeatureMap depth;          // expected termination depth
  FeatureMap transmittance;  // remaining after t_far
};

/// Dense ray march of the analytic fields: midpoint rule in camera depth from
/// near to far with the given depth step, alpha compositing per interval.
OracleImage oracle_render(const SyntheticScene& scene, const Camera& camera, double near, double far, double step);

/// exp(-integral of sigma) along the segment from the camera center to p,
/// midpoint rule with the given path step. Throws BehindCameraError when p is
/// not in front of the camera.
double oracle_point_visibility(const SyntheticScene& scene, const Camera& camera, const Vec3& p, double step);

/// Oracle-rendered multi-view dataset of the scene's rig.
MultiViewDataset make_dataset(const SyntheticScene& scene, double step);

}  // namespace evr
