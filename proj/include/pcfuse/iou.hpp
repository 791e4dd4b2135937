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

#include <span>
#include <vector>

#include "pcfuse/boxes.hpp"

namespace pcfuse {

/// Area of the intersection of two convex polygons in the (x, z) plane.
/// Sutherland-Hodgman clipping; vertices within 1e-12 of a clip edge count
/// as inside.
double convex_intersection_area(std::span<const Eigen::Vector2d> subject, std::span<const Eigen::Vector2d> clip);

/// Signed shoelace area (positive when counter-clockwise in x-z).
double polygon_area(std::span<const Eigen::Vector2d> poly);

/// Rotated-rectangle IoU of the footprints.
double iou_bev(const Box3D& a, const Box3D& b);

/// Footprint intersection times vertical overlap over the union of volumes.
double iou_3d(const Box3D& a, const Box3D& b);

struct ScoredBox {
  Box3D box;
  double score = 0.0;
};

/// Greedy suppression by iou_bev > iou_thresh. Returns kept indices in
/// descending score order; equal scores keep input order.
std::vector<std::size_t> nms(std::span<const ScoredBox> dets, double iou_thresh);

}  // namespace pcfuse
