// Copyright 2026 The pcfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pcfuse/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pcfuse {

namespace {

void require_finite(const Point3& p) {
  if (!p.allFinite()) throw std::invalid_argument("point has non-finite coordinates");
}

}  // namespace

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
  for (const auto& p : points_) require_finite(p);
}

PointCloud::PointCloud(std::vector<Point3> points, std::vector<double> reflectance)
    : points_(std::move(points)), reflectance_(std::move(reflectance)) {
  if (reflectance_->size() != points_.size()) {
    throw std::invalid_argument("reflectance length must equal point count");
  }
  for (const auto& p : points_) require_finite(p);
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  std::vector<Point3> pts;
  pts.reserve(indices.size());
  for (std::size_t i : indices) pts.push_back(points_.at(i));
  if (!reflectance_) return PointCloud(std::move(pts));
  std::vector<double> refl;
  refl.reserve(indices.size());
  for (std::size_t i : indices) refl.push_back((*reflectance_)[i]);
  return PointCloud(std::move(pts), std::move(refl));
}

void PointCloud::push_back(const Point3& p) {
  if (reflectance_) throw std::invalid_argument("cloud carries reflectance; pass one");
  require_finite(p);
  points_.push_back(p);
}

void PointCloud::push_back(const Point3& p, double reflectance) {
  if (!reflectance_) {
    if (!points_.empty()) throw std::invalid_argument("cloud has no reflectance channel");
    reflectance_.emplace();
  }
  require_finite(p);
  points_.push_back(p);
  reflectance_->push_back(reflectance);
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  if (image_width <= 0 || image_height <= 0) throw std::invalid_argument("image size must be positive");
}

Plane Plane::from_coefficients(double a, double b, double c, double d) {
  Vec3 n(a, b, c);
  if (!n.allFinite() || !std::isfinite(d)) throw std::invalid_argument("plane coefficients must be finite");
  const double len = n.norm();
  if (len == 0.0) throw std::invalid_argument("plane normal is zero");
  n /= len;
  d /= len;
  if (n.y() == 0.0) throw std::invalid_argument("vertical plane has no canonical sign");
  if (n.y() > 0.0) {
    n = -n;
    d = -d;
  }
  return Plane(n, d);
}

Plane Plane::from_normal_point(const Vec3& normal, const Point3& on_plane) {
  const Vec3 n = normal.normalized();
  return from_coefficients(n.x(), n.y(), n.z(), n.dot(on_plane));
}

std::optional<Pixel> project_point(const CameraModel& cam, const Point3& p) {
  if (p.z() <= 1e-6) return std::nullopt;
  return Pixel{cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

PointCloud filter_fov(const PointCloud& cloud, const CameraModel& cam) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto px = project_point(cam, cloud[i]);
    if (!px) continue;
    if (px->u >= 0.0 && px->u < cam.image_width && px->v >= 0.0 && px->v < cam.image_height) {
      keep.push_back(i);
    }
  }
  return cloud.select(keep);
}

PointCloud filter_y_band(const PointCloud& cloud, double y_min, double y_max) {
  if (y_min > y_max) throw std::invalid_argument("y band is empty (y_min > y_max)");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double y = cloud[i].y();
    if (y >= y_min && y <= y_max) keep.push_back(i);
  }
  return cloud.select(keep);
}

double signed_distance(const Plane& plane, const Point3& p) {
  return plane.normal().dot(p) - plane.offset();
}

double normal_angle_deg(const Plane& a, const Plane& b) {
  // atan2 form of arccos(n1 . n2); keeps resolution for tiny angles.
  const double s = a.normal().cross(b.normal()).norm();
  const double c = a.normal().dot(b.normal());
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

Mat3 rotation_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return r;
}

Mat3 rotation_between(const Vec3& from, const Vec3& to) {
  return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

PointCloud transform(const PointCloud& cloud, const RigidTransform& tf) {
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.push_back(tf.apply(p));
  if (cloud.has_reflectance()) return PointCloud(std::move(pts), cloud.reflectance());
  return PointCloud(std::move(pts));
}

}  // namespace pcfuse
