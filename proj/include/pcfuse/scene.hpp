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

// Deterministic synthetic scenes: a tilted ground plane, boxes resting on it,
// surface-sampled points, wall and pole clutter, and a synthetic feature
// backbone for the fusion stage.

#include <cstdint>
#include <string>
#include <vector>

#include "pcfuse/boxes.hpp"
#include "pcfuse/feature_grid.hpp"
#include "pcfuse/fusion.hpp"
#include "pcfuse/geometry.hpp"

namespace pcfuse {

struct SceneSpec {
  std::uint64_t rng_seed = 0;
  double tilt_x_deg = 0.0;  // rotation of the ground normal about x
  double tilt_z_deg = 0.0;  // rotation of the ground normal about z
  double height = 1.65;     // camera height above the plane
  int n_boxes = 3;
  double clutter_fraction = 0.0;  // share of all points that are clutter
  double points_per_m2 = 4.0;
  double sensor_noise_sigma = 0.0;
  // Ground patch in x and z.
  double x_min = -15.0, x_max = 15.0;
  double z_min = 3.0, z_max = 40.0;

  void validate() const;
};

enum class PointKind : std::uint8_t { Ground, Object, Clutter };

struct Scene {
  PointCloud cloud;
  std::vector<PointKind> kinds;  // one per point
  std::vector<Box3D> gts;
  Plane plane_truth;
  CameraModel cam;
};

/// Plane at distance `height` below the camera whose upward normal is
/// (0, -1, 0) rotated by tilt_x about x, then tilt_z about z.
Plane tilted_plane(double tilt_x_deg, double tilt_z_deg, double height);

Scene generate(const SceneSpec& spec);

/// n specs with seeded random tilts in [-max_tilt_deg, max_tilt_deg].
std::vector<SceneSpec> random_specs(std::size_t n, std::uint64_t seed, const SceneSpec& base, double max_tilt_deg);

struct SynthConfig {
  std::size_t grid_size = 7;
  std::size_t channels = 32;
  /// Write the best-matching gt's refinement target and the proposal's
  /// objectness into BEV channels 1..13 (needs channels >= 14).
  bool oracle = true;
  double stripe_period = 6.0;  // cells
  std::size_t point_pool = 128;
  std::uint64_t seed = 0;
};

struct SynthFeatures {
  FeatureGrid f_il;  // [S, S, C], rows = v
  FeatureGrid f_bl;  // [S, S, C], rows = x
  PointFeatureSet points;  // M x (S*S*C)
  double objectness = 0.0;  // BEV IoU with the axis-aligned best gt
  int matched_gt = -1;
};

/// Channel 0 of both grids holds a stripe pattern whose crests run along the
/// viewing ray of the proposal: in the image crop it varies along u only, in
/// the BEV crop across the ray. Tiling the image crop and turning it by the
/// azimuth therefore reproduces the BEV stripes.
SynthFeatures synth_features(const Scene& scene, const Box3D& proposal, const SynthConfig& cfg);

/// Writes velodyne/<id>.bin, label_2/<id>.txt and calib/<id>.txt under dir.
void export_kitti(const Scene& scene, const std::string& dir, int frame_id);

}  // namespace pcfuse
