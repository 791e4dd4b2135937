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

#include "pcfuse/boxes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pcfuse/errors.hpp"

namespace pcfuse {

namespace {

constexpr double kPi = std::numbers::pi;

// (across, along) signs of the four footprint corners.
constexpr std::array<std::array<double, 2>, 4> kFootprintSigns{{
    {+1.0, +1.0}, {-1.0, +1.0}, {-1.0, -1.0}, {+1.0, -1.0}}};

}  // namespace

void Box3D::validate() const {
  if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("box dimensions must be positive");
  }
  if (!center.allFinite() || !std::isfinite(yaw)) throw std::invalid_argument("box has non-finite fields");
  if (std::abs(ground_normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("ground normal must be unit");
}

Mat3 Box3D::rotation() const {
  const Vec3 up(0.0, -1.0, 0.0);
  Mat3 r = rotation_y(yaw);
  if ((ground_normal - up).squaredNorm() > 0.0) r = rotation_between(up, ground_normal) * r;
  return r;
}

Point3 Box3D::bottom_center() const { return center - 0.5 * height * ground_normal; }

double normalize_angle(double angle) {
  double a = std::fmod(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Box3D box_on_ground(const Point3& bottom_center, double length, double width, double height,
                    double yaw, const Vec3& ground_normal) {
  Box3D b;
  b.length = length;
  b.width = width;
  b.height = height;
  b.yaw = normalize_angle(yaw);
  b.ground_normal = ground_normal.normalized();
  b.center = bottom_center + 0.5 * height * b.ground_normal;
  b.validate();
  return b;
}

std::array<Point3, 8> box_corners(const Box3D& b) {
  const Mat3 r = b.rotation();
  std::array<Point3, 8> out;
  for (int face = 0; face < 2; ++face) {
    // Box frame y points down: bottom face at +h/2.
    const double y = face == 0 ? 0.5 * b.height : -0.5 * b.height;
    for (int i = 0; i < 4; ++i) {
      const Vec3 local(kFootprintSigns[i][0] * 0.5 * b.width, y, kFootprintSigns[i][1] * 0.5 * b.length);
      out[face * 4 + i] = b.center + r * local;
    }
  }
  return out;
}

std::array<Point3, 4> bottom_corners(const Box3D& b) {
  const auto c = box_corners(b);
  return {c[0], c[1], c[2], c[3]};
}

std::array<Eigen::Vector2d, 4> bev_footprint(const Box3D& b) {
  const double s = std::sin(b.yaw);
  const double c = std::cos(b.yaw);
  std::array<Eigen::Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) {
    const double across = kFootprintSigns[i][0] * 0.5 * b.width;
    const double along = kFootprintSigns[i][1] * 0.5 * b.length;
    // rotation_y applied to (across, along) in the (x, z) plane.
    out[i] = Eigen::Vector2d(b.center.x() + c * across + s * along, b.center.z() - s * across + c * along);
  }
  return out;
}

bool contains(const Box3D& b, const Point3& p) {
  const Vec3 local = b.rotation().transpose() * (p - b.center);
  constexpr double tol = 1e-12;
  return std::abs(local.x()) <= 0.5 * b.width + tol && std::abs(local.y()) <= 0.5 * b.height + tol &&
         std::abs(local.z()) <= 0.5 * b.length + tol;
}

Vec3 axis_aligned_extents(const Box3D& b) {
  const double s = std::abs(std::sin(b.yaw));
  const double c = std::abs(std::cos(b.yaw));
  return {b.length * s + b.width * c, b.height, b.length * c + b.width * s};
}

CornerEncoding encode_corners(const Box3D& b) {
  CornerEncoding e;
  e.bev_corners = bev_footprint(b);
  e.y_bottom = b.y_bottom();
  e.y_top = b.y_top();
  e.sin_yaw = std::sin(b.yaw);
  e.cos_yaw = std::cos(b.yaw);
  return e;
}

Box3D decode_corners(const CornerEncoding& e) {
  const auto& q = e.bev_corners;
  double area2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = q[i];
    const auto& b = q[(i + 1) % 4];
    area2 += a.x() * b.y() - a.y() * b.x();
  }
  if (std::abs(area2) < 1e-12) throw DegenerateGeometry("corner quad has zero area");
  const double angle_norm = std::hypot(e.sin_yaw, e.cos_yaw);
  if (angle_norm < 1e-12) throw DegenerateGeometry("angle pair is zero");
  if (!(e.y_bottom > e.y_top)) throw DegenerateGeometry("y_bottom must lie below y_top");

  // Edge directions as yaw-like angles atan2(dx, dz), averaged modulo pi/2
  // through the quadrupled angle.
  double s4 = 0.0;
  double c4 = 0.0;
  std::array<Eigen::Vector2d, 4> edges;
  for (int i = 0; i < 4; ++i) {
    edges[i] = q[(i + 1) % 4] - q[i];
    const double len = edges[i].norm();
    const double phi = std::atan2(edges[i].x(), edges[i].y());
    s4 += len * std::sin(4.0 * phi);
    c4 += len * std::cos(4.0 * phi);
  }
  const double axis = std::atan2(s4, c4) / 4.0;
  const double target = std::atan2(e.sin_yaw, e.cos_yaw);
  double yaw = axis;
  double best = 1e300;
  for (int k = 0; k < 4; ++k) {
    const double cand = axis + k * 0.5 * kPi;
    const double diff = std::abs(normalize_angle(cand - target));
    if (diff < best) {
      best = diff;
      yaw = cand;
    }
  }
  yaw = normalize_angle(yaw);

  const Eigen::Vector2d heading(std::sin(yaw), std::cos(yaw));
  const Eigen::Vector2d across(std::cos(yaw), -std::sin(yaw));
  double len_sum = 0.0;
  double wid_sum = 0.0;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (int i = 0; i < 4; ++i) {
    len_sum += std::abs(edges[i].dot(heading));
    wid_sum += std::abs(edges[i].dot(across));
    centroid += q[i];
  }
  centroid /= 4.0;

  Box3D b;
  b.length = 0.5 * len_sum;
  b.width = 0.5 * wid_sum;
  b.height = e.y_bottom - e.y_top;
  b.yaw = yaw;
  b.center = Point3(centroid.x(), 0.5 * (e.y_bottom + e.y_top), centroid.y());
  b.validate();
  return b;
}

}  // namespace pcfuse

namespace pcfuse {

Box3D axis_aligned_box(const Box3D& b) {
  const Vec3 e = axis_aligned_extents(b);
  Box3D out;
  out.center = b.center;
  out.width = e.x();
  out.height = e.y();
  out.length = e.z();
  return out;
}

RefinementTarget encode_refinement(const Box3D& proposal, const Box3D& gt) {
  Box3D folded = gt;
  folded.yaw = normalize_angle(gt.yaw);
  if (folded.yaw > 0.5 * kPi) folded.yaw -= kPi;
  if (folded.yaw <= -0.5 * kPi) folded.yaw += kPi;
  const auto fp = bev_footprint(folded);
  RefinementTarget t{};
  for (int i = 0; i < 4; ++i) {
    t[2 * i] = fp[i].x() - proposal.center.x();
    t[2 * i + 1] = fp[i].y() - proposal.center.z();
  }
  t[8] = gt.y_bottom() - proposal.y_bottom();
  t[9] = gt.y_top() - proposal.y_top();
  t[10] = std::sin(gt.yaw);
  t[11] = std::cos(gt.yaw);
  return t;
}

Box3D decode_refinement(const Box3D& proposal, std::span<const double> t) {
  if (t.size() != 12) throw std::invalid_argument("refinement vector needs 12 entries");
  CornerEncoding e;
  for (int i = 0; i < 4; ++i) e.bev_corners[i] = Eigen::Vector2d(t[2 * i] + proposal.center.x(), t[2 * i + 1] + proposal.center.z());
  e.y_bottom = t[8] + proposal.y_bottom();
  e.y_top = t[9] + proposal.y_top();
  e.sin_yaw = t[10];
  e.cos_yaw = t[11];
  return decode_corners(e);
}

}  // namespace pcfuse
