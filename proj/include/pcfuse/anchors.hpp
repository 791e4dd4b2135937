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
#include <cstdint>
#include <span>
#include <vector>

#include "pcfuse/boxes.hpp"

namespace pcfuse {

struct SizePrior {
  double length = 3.9;
  double width = 1.6;
  double height = 1.56;
};

struct AnchorConfig {
  double stride = 0.5;
  std::vector<SizePrior> sizes{SizePrior{}};
  std::vector<double> orientations{0.0, 1.5707963267948966};
  // Lattice extents in x and z, both ends inclusive.
  double x_min = -40.0, x_max = 40.0;
  double z_min = 0.0, z_max = 70.0;

  void validate() const;
  [[nodiscard]] std::size_t lattice_x() const;
  [[nodiscard]] std::size_t lattice_z() const;
};

struct AnchorGrid {
  std::vector<Box3D> anchors;
  double stride = 0.5;
  std::vector<double> orientations;
  std::vector<SizePrior> size_priors;
};

/// Anchors on every lattice point (x outer, z inner, then size, then
/// orientation), each with its bottom-face center on the plane.
AnchorGrid gen_anchors(const Plane& plane, const AnchorConfig& cfg);

enum class AnchorLabel { Negative = 0, Positive = 1, Ignore = 2 };

struct RpnThresholds {
  double positive = 0.5;
  double negative = 0.3;
};

enum class SizeEncoding { Raw, Log };

/// Axis-aligned regression target: (dx, dy, dz, dsx, dsy, dsz).
using RpnDelta = std::array<double, 6>;

struct RpnTargets {
  std::vector<AnchorLabel> labels;
  std::vector<int> matched_gt;           // -1 unless positive
  std::vector<RpnDelta> reg_targets;     // one per anchor, zero unless positive
  [[nodiscard]] std::size_t positives() const;
};

/// Encodes gt relative to anchor with axis-aligned extents.
RpnDelta encode_rpn(const Box3D& anchor, const Box3D& gt, SizeEncoding enc = SizeEncoding::Raw);

/// Inverse of encode_rpn: an axis-aligned box (yaw 0, length along z).
Box3D decode_rpn(const Box3D& anchor, const RpnDelta& delta, SizeEncoding enc = SizeEncoding::Raw);

/// BEV IoU >= positive -> Positive, < negative -> Negative, otherwise Ignore.
/// Positives regress toward their best gt (lowest index on ties).
RpnTargets assign_rpn_targets(std::span<const Box3D> anchors, std::span<const Box3D> gts,
                              const RpnThresholds& th = {}, SizeEncoding enc = SizeEncoding::Raw);

/// k-means over (l, w, h) with seeded k-means++ init. Clusters come back
/// sorted by descending volume.
std::vector<SizePrior> cluster_sizes(std::span<const Box3D> boxes, std::size_t k, std::uint64_t seed,
                                     int max_iterations = 100);

}  // namespace pcfuse
