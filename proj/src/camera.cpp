#include "evr/camera.hpp"

#include "evr/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evr {

namespace {

constexpr double kOrthonormalTolerance = 1e-6;

bool finite(double x) { return std::isfinite(x); }

}  // namespace

Camera::Camera(double fx, double fy, double cx, double cy, const Mat3& rotation,
               const Vec3& translation, int width, int height)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), rotation_(rotation), translation_(translation),
      width_(width), height_(height) {
  if (!(fx > 0.0) || !finite(fx)) throw ArgumentError("camera.fx: must be finite and > 0");
  if (!(fy > 0.0) || !finite(fy)) throw ArgumentError("camera.fy: must be finite and > 0");
  if (!finite(cx)) throw ArgumentError("camera.cx: must be finite");
  if (!finite(cy)) throw ArgumentError("camera.cy: must be finite");
  if (width < 1) throw ArgumentError("camera.width: must be >= 1");
  if (height < 1) throw ArgumentError("camera.height: must be >= 1");
  if (!rotation.allFinite()) throw ArgumentError("camera.rotation: must be finite");
  if (!translation.allFinite()) throw ArgumentError("camera.translation: must be finite");
  const double err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > kOrthonormalTolerance) {
    throw ArgumentError("camera.rotation: not orthonormal (max |R^T R - I| = " +
                        std::to_string(err) + ")");
  }
}

Camera Camera::look_at(const Vec3& center, const Vec3& target, double fx, double fy, int width,
                       int height) {
  const Vec3 forward = (target - center).normalized();
  Vec3 up(0.0, -1.0, 0.0);
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9) up = Vec3(0.0, 0.0, 1.0);
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 rotation;
  rotation.row(0) = right.transpose();
  rotation.row(1) = down.transpose();
  rotation.row(2) = forward.transpose();
  const Vec3 translation = -rotation * center;
  return Camera(fx, fy, 0.5 * (width - 1), 0.5 * (height - 1), rotation, translation, width,
                height);
}

bool Camera::try_project(const Vec3& p, PixelDepth& out) const {
  const Vec3 q = rotation_ * p + translation_;
  if (q.z() <= kDepthEpsilon) return false;
  out.u = fx_ * q.x() / q.z() + cx_;
  out.v = fy_ * q.y() / q.z() + cy_;
  out.z = q.z();
  return true;
}

PixelDepth Camera::project(const Vec3& p) const {
  PixelDepth out;
  if (!try_project(p, out)) throw BehindCameraError("project: point is behind the camera");
  return out;
}

Mat3 Camera::project_jacobian(const Vec3& p) const {
  const Vec3 q = rotation_ * p + translation_;
  if (q.z() <= kDepthEpsilon) throw BehindCameraError("project_jacobian: point is behind the camera");
  const double iz = 1.0 / q.z();
  Mat3 dq;  // d(u, v, z)/dq
  dq << fx_ * iz, 0.0, -fx_ * q.x() * iz * iz,
        0.0, fy_ * iz, -fy_ * q.y() * iz * iz,
        0.0, 0.0, 1.0;
  return dq * rotation_;
}

Vec3 Camera::unproject(double u, double v, double z) const {
  if (!(z > 0.0)) throw RangeError("unproject: depth must be > 0");
  const Vec3 q((u - cx_) / fx_ * z, (v - cy_) / fy_ * z, z);
  return rotation_.transpose() * (q - translation_);
}

Vec3 Camera::ray_direction(double u, double v) const {
  return rotation_.transpose() * Vec3((u - cx_) / fx_, (v - cy_) / fy_, 1.0);
}

Camera Camera::resized(int width, int height) const {
  const double sx = static_cast<double>(width) / width_;
  const double sy = static_cast<double>(height) / height_;
  return Camera(fx_ * sx, fy_ * sy, (cx_ + 0.5) * sx - 0.5, (cy_ + 0.5) * sy - 0.5, rotation_,
                translation_, width, height);
}

bool Camera::operator==(const Camera& o) const {
  return fx_ == o.fx_ && fy_ == o.fy_ && cx_ == o.cx_ && cy_ == o.cy_ &&
         rotation_ == o.rotation_ && translation_ == o.translation_ && width_ == o.width_ &&
         height_ == o.height_;
}

DepthPlaneMap::DepthPlaneMap(double near, double far, int plane_count)
    : near_(near), far_(far), plane_count_(plane_count) {
  if (!(near > 0.0) || !(far > near) || !std::isfinite(far)) {
    throw ArgumentError("depth planes: require 0 < near < far");
  }
  if (plane_count < 1) throw ArgumentError("depth planes: plane_count must be >= 1");
}

double DepthPlaneMap::depth(double d) const {
  if (!(d >= 0.0 && d <= plane_count_)) throw RangeError("plane_depth: index outside [0, D]");
  return depth_unchecked(d);
}

double DepthPlaneMap::index(double z) const {
  if (!contains_depth(z)) throw RangeError("plane_index: depth outside [near, far]");
  return index_unchecked(z);
}

FrustumGrid::FrustumGrid(Camera camera, DepthPlaneMap planes, int grid_w, int grid_h)
    : camera_(std::move(camera)), planes_(planes), grid_w_(grid_w), grid_h_(grid_h) {
  if (grid_w < 1 || grid_h < 1) throw ArgumentError("frustum grid: grid_w and grid_h must be >= 1");
}

Vec3 FrustumGrid::voxel_point(double u, double v, double d) const {
  return camera_.unproject(column_to_pixel(u), row_to_pixel(v), planes_.depth_unchecked(d));
}

bool FrustumGrid::locate(const Vec3& p, VoxelCoord& out) const {
  PixelDepth px;
  if (!camera_.try_project(p, px)) return false;
  if (px.u < -0.5 || px.u > camera_.width() - 0.5) return false;
  if (px.v < -0.5 || px.v > camera_.height() - 0.5) return false;
  if (!planes_.contains_depth(px.z)) return false;
  out.u = pixel_to_column(px.u);
  out.v = pixel_to_row(px.v);
  out.d = planes_.index_unchecked(px.z);
  return true;
}

Mat3 FrustumGrid::locate_jacobian(const Vec3& p) const {
  Mat3 j = camera_.project_jacobian(p);
  j.row(0) /= scale_x();
  j.row(1) /= scale_y();
  j.row(2) *= planes_.plane_count() / (planes_.far() - planes_.near());
  return j;
}

std::vector<int> select_nearest_views(const Camera& novel, std::span<const Camera> pool, int n) {
  if (pool.empty()) throw ArgumentError("select_nearest_views: empty camera pool");
  if (n < 1 || static_cast<size_t>(n) > pool.size()) {
    throw ArgumentError("select_nearest_views: n must be in [1, pool size]");
  }
  const Vec3 c = novel.center();
  std::vector<double> dist(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) dist[i] = (pool[i].center() - c).norm();
  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  order.resize(n);
  return order;
}

nlohmann::json camera_to_json(const Camera& camera) {
  // x + 0.0 folds -0.0 into 0.0 so the text is stable across serializers
  const auto z = [](double x) { return x + 0.0; };
  nlohmann::json j;
  j["fx"] = camera.fx();
  j["fy"] = camera.fy();
  j["cx"] = camera.cx();
  j["cy"] = camera.cy();
  j["width"] = camera.width();
  j["height"] = camera.height();
  std::vector<double> r(9);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r[row * 3 + col] = z(camera.rotation()(row, col));
  j["rotation"] = r;
  j["translation"] = {z(camera.translation().x()), z(camera.translation().y()), z(camera.translation().z())};
  return j;
}

namespace {

double number_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ArgumentError(std::string("camera.") + key + ": missing");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ArgumentError(std::string("camera.") + key + ": must be a number");
  return v.get<double>();
}

int int_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ArgumentError(std::string("camera.") + key + ": missing");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ArgumentError(std::string("camera.") + key + ": must be an integer");
  return v.get<int>();
}

std::vector<double> array_field(const nlohmann::json& j, const char* key, size_t n) {
  if (!j.contains(key)) throw ArgumentError(std::string("camera.") + key + ": missing");
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != n) {
    throw ArgumentError(std::string("camera.") + key + ": must be an array of " +
                        std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ArgumentError(std::string("camera.") + key + ": must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

Camera camera_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("camera: must be a JSON object");
  const auto r = array_field(j, "rotation", 9);
  const auto t = array_field(j, "translation", 3);
  Mat3 rotation;
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) rotation(row, col) = r[row * 3 + col];
  return Camera(number_field(j, "fx"), number_field(j, "fy"), number_field(j, "cx"),
                number_field(j, "cy"), rotation, Vec3(t[0], t[1], t[2]), int_field(j, "width"),
                int_field(j, "height"));
}

}  // namespace evr
