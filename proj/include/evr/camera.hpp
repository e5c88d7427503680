#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace evr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Minimum camera-frame depth accepted by Camera::project.
inline constexpr double kDepthEpsilon = 1e-9;

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Pinhole camera with a world-to-camera rigid transform.
///
/// Conventions: right-handed, the camera looks down +z, the pixel origin is
/// the top-left corner and pixel centers sit on integer coordinates. A point
/// p maps to the camera frame as q = R p + t.
class Camera {
 public:
  Camera() = default;

  /// Validates every invariant; throws ArgumentError naming the bad field.
  Camera(double fx, double fy, double cx, double cy, const Mat3& rotation, const Vec3& translation,
         int width, int height);

  /// Camera at `center` looking at `target`; image up is world -y.
  static Camera look_at(const Vec3& center, const Vec3& target, double fx, double fy, int width,
                        int height);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  int width() const { return width_; }
  int height() const { return height_; }

  /// Camera center in world coordinates, -R^T t.
  Vec3 center() const { return -rotation_.transpose() * translation_; }

  /// Forward projection. Throws BehindCameraError when q.z <= kDepthEpsilon.
  /// The returned pixel may lie outside the image rectangle.
  PixelDepth project(const Vec3& p) const;

  /// Like project(), but reports points behind the camera through the return
  /// value instead of throwing.
  bool try_project(const Vec3& p, PixelDepth& out) const;

  /// d(u, v, z)/dp, rows ordered (u, v, z).
  Mat3 project_jacobian(const Vec3& p) const;

  /// Inverse projection of pixel (u, v) at camera depth z > 0.
  Vec3 unproject(double u, double v, double z) const;

  /// World-space ray direction whose camera-frame z component is one, so that
  /// center() + z * ray_direction(u, v) == unproject(u, v, z).
  Vec3 ray_direction(double u, double v) const;

  /// Same pose with the image resampled to width x height. Intrinsics scale so
  /// that the image rectangle covers the same field of view.
  Camera resized(int width, int height) const;

  bool operator==(const Camera& other) const;

 private:
  double fx_ = 1.0, fy_ = 1.0, cx_ = 0.0, cy_ = 0.0;
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  int width_ = 1, height_ = 1;
};

/// Uniform depth planes between near and far: depth(d) = near + d (far - near) / D.
class DepthPlaneMap {
 public:
  DepthPlaneMap() = default;
  DepthPlaneMap(double near, double far, int plane_count);

  double near() const { return near_; }
  double far() const { return far_; }
  int plane_count() const { return plane_count_; }
  /// Depth distance between consecutive planes.
  double spacing() const { return (far_ - near_) / plane_count_; }

  /// Throws RangeError for d outside [0, D].
  double depth(double d) const;
  /// Throws RangeError for z outside [near, far].
  double index(double z) const;

  /// Unchecked variants for callers that already tested the range.
  double depth_unchecked(double d) const { return near_ + d * (far_ - near_) / plane_count_; }
  double index_unchecked(double z) const { return (z - near_) / (far_ - near_) * plane_count_; }

  bool contains_depth(double z) const { return z >= near_ && z <= far_; }

 private:
  double near_ = 1.0;
  double far_ = 2.0;
  int plane_count_ = 1;
};

struct VoxelCoord {
  double u = 0.0;  // column (width axis)
  double v = 0.0;  // row (height axis)
  double d = 0.0;  // plane index
};

/// Discretized camera frustum: grid_h x grid_w columns of plane_count planes.
///
/// Voxel column u maps to pixel (u + 0.5) * width / grid_w - 0.5, and likewise
/// for rows, so voxel centers land on pixel-block centers.
class FrustumGrid {
 public:
  FrustumGrid() = default;
  FrustumGrid(Camera camera, DepthPlaneMap planes, int grid_w, int grid_h);

  const Camera& camera() const { return camera_; }
  const DepthPlaneMap& planes() const { return planes_; }
  int grid_w() const { return grid_w_; }
  int grid_h() const { return grid_h_; }
  int depth() const { return planes_.plane_count(); }

  double scale_x() const { return static_cast<double>(camera_.width()) / grid_w_; }
  double scale_y() const { return static_cast<double>(camera_.height()) / grid_h_; }

  double column_to_pixel(double u) const { return (u + 0.5) * scale_x() - 0.5; }
  double row_to_pixel(double v) const { return (v + 0.5) * scale_y() - 0.5; }
  double pixel_to_column(double px) const { return (px + 0.5) / scale_x() - 0.5; }
  double pixel_to_row(double py) const { return (py + 0.5) / scale_y() - 0.5; }

  /// World point of voxel (u, v, d).
  Vec3 voxel_point(double u, double v, double d) const;

  /// Maps a world point into voxel coordinates. Returns false when the point
  /// is behind the camera, projects outside the image rectangle
  /// [-0.5, W - 0.5] x [-0.5, H - 0.5], or has depth outside [near, far].
  bool locate(const Vec3& p, VoxelCoord& out) const;

  /// d(u, v, d)/dp for a point inside the frustum.
  Mat3 locate_jacobian(const Vec3& p) const;

 private:
  Camera camera_;
  DepthPlaneMap planes_;
  int grid_w_ = 1;
  int grid_h_ = 1;
};

/// Indices of the n pool cameras whose centers are closest to the novel
/// camera's center, ascending by distance, ties by ascending index.
std::vector<int> select_nearest_views(const Camera& novel, std::span<const Camera> pool, int n);

nlohmann::json camera_to_json(const Camera& camera);
/// Throws ArgumentError with a field-level message on malformed input or
/// violated camera invariants.
Camera camera_from_json(const nlohmann::json& j);

}  // namespace evr
