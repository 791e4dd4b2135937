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

#include <array>
#include <span>
#include <vector>

#include "pcfuse/geometry.hpp"

namespace pcfuse {

/// Oriented 3D box in the camera frame.
///
/// `yaw` is a right-handed rotation about the camera y axis with 0 facing +z,
/// so the heading in the (x, z) plane is (sin yaw, cos yaw). `ground_normal`
/// is the upward unit normal of the surface the box rests on; the default
/// (0, -1, 0) gives the usual KITTI yaw-only box. A tilted normal tilts the
/// whole box so that its bottom face lies in the ground plane. IoU and the
/// corner encoding only look at the yaw-only footprint.
struct Box3D {
  Point3 center = Point3::Zero();
  double length = 1.0;  // along heading
  double width = 1.0;   // across heading
  double height = 1.0;  // vertical
  double yaw = 0.0;
  Vec3 ground_normal{0.0, -1.0, 0.0};

  void validate() const;
  /// Box frame to camera frame rotation (columns: across, down, heading).
  [[nodiscard]] Mat3 rotation() const;
  [[nodiscard]] Point3 bottom_center() const;
  [[nodiscard]] double volume() const { return length * width * height; }
  [[nodiscard]] double y_top() const { return center.y() - 0.5 * height; }
  [[nodiscard]] double y_bottom() const { return center.y() + 0.5 * height; }
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

/// Builds a box whose bottom-face center sits at `bottom_center` on a ground
/// with upward normal `ground_normal`.
Box3D box_on_ground(const Point3& bottom_center, double length, double width, double height,
                    double yaw, const Vec3& ground_normal = Vec3(0.0, -1.0, 0.0));

/// Eight corners: bottom face first, then top face in the same order. Each
/// face runs counter-clockwise seen from above, starting at (+l/2, +w/2) in
/// the box frame: (+l,+w), (+l,-w), (-l,-w), (-l,+w).
std::array<Point3, 8> box_corners(const Box3D& b);

/// The first four entries of box_corners.
std::array<Point3, 4> bottom_corners(const Box3D& b);

/// Footprint rectangle in the (x, z) plane, same ordering as box_corners.
std::array<Eigen::Vector2d, 4> bev_footprint(const Box3D& b);

/// Oriented containment test (points on the surface count as inside).
bool contains(const Box3D& b, const Point3& p);

/// Axis-aligned extents (x, y, z) of the yaw-only box.
Vec3 axis_aligned_extents(const Box3D& b);

/// Refinement-stage box encoding: footprint corners, two heights and the
/// heading as a (sin, cos) pair.
struct CornerEncoding {
  std::array<Eigen::Vector2d, 4> bev_corners;  // (x, z)
  double y_bottom = 0.0;
  double y_top = 0.0;
  double sin_yaw = 0.0;
  double cos_yaw = 1.0;
};

CornerEncoding encode_corners(const Box3D& b);

/// Best-fit rectangle through four (possibly noisy) footprint corners. The
/// rectangle axis comes from a length-weighted mean of edge directions
/// (modulo 90 degrees); the (sin, cos) pair picks which axis is the heading
/// and resolves the 180-degree ambiguity. Throws DegenerateGeometry for a
/// zero-area quad or a zero angle pair.
Box3D decode_corners(const CornerEncoding& e);

/// Yaw-0 box spanning the axis-aligned footprint extents of b.
Box3D axis_aligned_box(const Box3D& b);

/// Refinement regression target of `gt` relative to `proposal`: four
/// footprint corners minus the proposal's (x, z) center (corner order taken
/// with the yaw folded into (-pi/2, pi/2]), y_bottom and y_top minus the
/// proposal's, then sin and cos of the gt yaw.
using RefinementTarget = std::array<double, 12>;
RefinementTarget encode_refinement(const Box3D& proposal, const Box3D& gt);
Box3D decode_refinement(const Box3D& proposal, std::span<const double> t);

}  // namespace pcfuse
