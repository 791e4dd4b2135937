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

#include <optional>
#include <utility>

#include "pcfuse/feature_grid.hpp"
#include "pcfuse/geometry.hpp"

namespace pcfuse {

/// Bird's-eye-view grid. Rows index x, columns index z; heights are taken
/// relative to the ground plane.
struct BevConfig {
  double x_min = -40.0, x_max = 40.0;
  double z_min = 0.0, z_max = 70.0;
  double cell = 0.1;
  double band_lo = -0.2, band_hi = 2.3;
  int n_slices = 5;
  /// Density normaliser: min(1, log(n + 1) / log(density_log_base)).
  double density_log_base = 16.0;
  /// Store height above the band bottom instead of height within the slice.
  bool absolute_heights = false;

  void validate() const;
  [[nodiscard]] std::size_t rows() const;  // x cells
  [[nodiscard]] std::size_t cols() const;  // z cells
  [[nodiscard]] double slice_height() const { return (band_hi - band_lo) / n_slices; }
};

struct BevMaps {
  FeatureGrid density;  // rows x cols x 1
  FeatureGrid heights;  // rows x cols x n_slices
};

/// One density map plus n_slices max-height maps. Points outside the height
/// band or the grid are dropped. Slice s covers [s*D, (s+1)*D) above the band
/// bottom (D = band / n_slices); the stored value is the max height inside
/// the slice, or 0 for an empty cell.
BevMaps rasterize(const PointCloud& cloud, const Plane& plane, const BevConfig& cfg);

/// Cell center (x, z) in meters. Throws std::out_of_range for bad indices.
std::pair<double, double> bev_to_world(const BevConfig& cfg, std::size_t row, std::size_t col);

/// Cell containing (x, z), or nullopt when outside the grid.
std::optional<std::pair<std::size_t, std::size_t>> world_to_bev(const BevConfig& cfg, double x, double z);

}  // namespace pcfuse
