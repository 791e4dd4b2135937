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

#pragma once

// Camera-frame conventions (KITTI): x right, y down, z forward, meters.
// The ground normal therefore points roughly along (0, -1, 0).

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

namespace pcfuse {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Ordered point set with optional per-point reflectance in [0, 1].
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> points);
  PointCloud(std::vector<Point3> points, std::vector<double> reflectance);

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool empty() const { return points_.empty(); }
  [[nodiscard]] const std::vector<Point3>& points() const { return points_; }
  [[nodiscard]] const Point3& operator[](std::size_t i) const { return points_[i]; }
  [[nodiscard]] bool has_reflectance() const { return reflectance_.has_value(); }
  [[nodiscard]] const std::vector<double>& reflectance() const { return *reflectance_; }

  /// Subset by index list, preserving reflectance.
  [[nodiscard]] PointCloud select(std::span<const std::size_t> indices) const;

  void push_back(const Point3& p);
  void push_back(const Point3& p, double reflectance);

 private:
  std::vector<Point3> points_;
  std::optional<std::vector<double>> reflectance_;
};

/// Pinhole camera without distortion.
struct CameraModel {
  double fx = 721.5377;
  double fy = 721.5377;
  double cx = 609.5593;
  double cy = 172.854;
  int image_width = 1242;
  int image_height = 375;

  void validate() const;
};

/// Ground plane a*x + b*y + c*z = d with unit normal (a, b, c).
///
/// Always stored in canonical sign b < 0, so the normal points up (toward
/// -y) and the signed distance of a point above the ground is positive.
/// The naive KITTI plane [0, -1, 0, 1.65] is stored as normal (0, -1, 0),
/// d = -1.65.
class Plane {
 public:
  /// Horizontal plane through the origin.
  Plane() = default;
  /// Normalises (a, b, c) and flips all four signs when b > 0.
  /// Throws std::invalid_argument for a zero normal, non-finite input or
  /// b == 0 (a vertical plane has no upward side).
  static Plane from_coefficients(double a, double b, double c, double d);
  static Plane from_normal_point(const Vec3& normal, const Point3& on_plane);

  [[nodiscard]] const Vec3& normal() const { return normal_; }
  [[nodiscard]] double offset() const { return offset_; }
  /// Distance from the camera origin to the plane.
  [[nodiscard]] double height() const { return std::abs(offset_); }

 private:
  Plane(const Vec3& n, double d) : normal_(n), offset_(d) {}
  Vec3 normal_{0.0, -1.0, 0.0};
  double offset_ = 0.0;
};

std::optional<Pixel> project_point(const CameraModel& cam, const Point3& p);

/// Keeps points with z > 0 whose projection lands in [0, w) x [0, h).
PointCloud filter_fov(const PointCloud& cloud, const CameraModel& cam);

/// Keeps points with y_min <= y <= y_max.
PointCloud filter_y_band(const PointCloud& cloud, double y_min, double y_max);

/// a*x + b*y + c*z - d; positive above the ground.
double signed_distance(const Plane& plane, const Point3& p);

/// Angle between two plane normals in degrees.
double normal_angle_deg(const Plane& a, const Plane& b);

/// Rotation about the camera y axis (right-handed): maps +z to (sin a, 0, cos a).
Mat3 rotation_y(double angle);

/// Smallest rotation taking `from` onto `to` (both unit vectors).
Mat3 rotation_between(const Vec3& from, const Vec3& to);

/// Rigid transform p' = R p + t, e.g. LiDAR to camera.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] Point3 apply(const Point3& p) const { return rotation * p + translation; }
  [[nodiscard]] RigidTransform inverse() const;
};

PointCloud transform(const PointCloud& cloud, const RigidTransform& tf);

}  // namespace pcfuse
