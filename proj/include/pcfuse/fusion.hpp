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

// Per-proposal feature extraction and the two fusion modules: adaptive
// weighting of the image / BEV / point branches, and spatial fusion of the
// tiled image and BEV crops with an azimuth rotation.
//
// Grid layouts: an image crop is [v, u, C] (row = v); a BEV crop is [x, z, C].
// Volumes are [x, y, z, C].

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pcfuse/bev.hpp"
#include "pcfuse/boxes.hpp"
#include "pcfuse/feature_grid.hpp"
#include "pcfuse/geometry.hpp"
#include "pcfuse/nn/autodiff.hpp"
#include "pcfuse/nn/layers.hpp"

namespace pcfuse {

/// Continuous rectangle in grid coordinates; cell (r, c) covers
/// [r, r+1) x [c, c+1).
struct GridRect {
  double row0 = 0.0, col0 = 0.0;
  double row1 = 0.0, col1 = 0.0;
  [[nodiscard]] double rows() const { return row1 - row0; }
  [[nodiscard]] double cols() const { return col1 - col0; }
};

struct RoiRects {
  GridRect image;  // rows = v, cols = u, clamped to the image
  GridRect bev;    // rows = x cells, cols = z cells, clamped to the grid
};

/// Throws DegenerateGeometry when no corner is in front of the camera.
RoiRects roi_project(const Box3D& box, const CameraModel& cam, const BevConfig& bev);

/// Bilinear resample of `rect` to out_h x out_w. Sample (i, j) reads the grid
/// at row0 + (i + 0.5) * rows / out_h - 0.5 (likewise for columns), clamped
/// to the grid. Throws std::invalid_argument for an empty rect.
FeatureGrid crop_resize(const FeatureGrid& grid, GridRect rect, std::size_t out_h, std::size_t out_w);

struct PointFeatureSet {
  nn::Mat features;  // M x C, rows past valid_count are zero
  std::size_t valid_count = 0;
};

/// Rows of `features` whose point lies inside `box`. More than M candidates
/// are subsampled without replacement after sorting them by coordinates, so
/// the result does not depend on input order.
PointFeatureSet point_pool(const nn::Mat& features, const Box3D& box, const PointCloud& points, std::size_t m = 128,
                           std::uint64_t seed = 0);

/// Per-channel max over valid rows (zero vector when none). `literal` lets
/// the zero padding take part in the max.
std::vector<double> max_pool_points(const PointFeatureSet& s, bool literal = false);

double azimuth(const Box3D& box);

// Tiling, rotation and pooling. These are linear, so each also exists as an
// nn::LinearMap for use inside a differentiable graph.
FeatureVolume tile_image(const FeatureGrid& f_il, std::size_t depth);
FeatureVolume tile_bev(const FeatureGrid& f_bl, std::size_t height);
/// Resamples every y slab at coordinates rotated by -angle about the slab
/// center, which turns the content by +angle (the +z axis goes to
/// (sin angle, cos angle)). Bilinear with zero fill. Requires X == Z.
FeatureVolume rotate_volume_y(const FeatureVolume& v, double angle);
FeatureGrid mean_pool_x(const FeatureVolume& v);  // [Y, Z, C]
FeatureGrid mean_pool_y(const FeatureVolume& v);  // [X, Z, C]
FeatureGrid mean_pool_z(const FeatureVolume& v);  // [X, Y, C]
FeatureVolume operator+(const FeatureVolume& a, const FeatureVolume& b);

std::shared_ptr<const nn::LinearMap> tile_image_map(std::size_t s, std::size_t c, std::size_t depth);
std::shared_ptr<const nn::LinearMap> tile_bev_map(std::size_t s, std::size_t c, std::size_t height);
std::shared_ptr<const nn::LinearMap> rotate_y_map(std::size_t x, std::size_t y, std::size_t c, double angle);
/// axis 0, 1, 2 pools over x, y, z.
std::shared_ptr<const nn::LinearMap> mean_pool_map(std::size_t x, std::size_t y, std::size_t z, std::size_t c, int axis);

/// f_s = (MeanPool_x + MeanPool_y + MeanPool_z)(rotate(tile_image(f_il), az)
/// + tile_bev(f_bl)) flattened, averaged with f_pl. Grids are S x S x C and
/// f_pl has S*S*C entries.
std::vector<double> spatial_fuse(const FeatureGrid& f_il, const FeatureGrid& f_bl, std::span<const double> f_pl,
                                 double az);

/// Graph form. f_il and f_bl are (S*S) x C, f_pl is 1 x (S*S*C); returns
/// 1 x (S*S*C).
nn::Var spatial_fuse(const nn::Var& f_il, const nn::Var& f_bl, const nn::Var& f_pl, std::size_t s, double az);

struct AwWeights {
  double w_img = 0.0;
  double w_bev = 0.0;
  double w_pt = 0.0;
};

struct AwOutput {
  nn::Var img, bev, pt;  // scaled branches, (S*S) x C each
  nn::Var weights;       // 1 x 3
};

/// Adaptive weighting: a 1x1 channel reduction to C/4 per branch, flatten,
/// sum, MLP to three logits, softmax. Each branch is multiplied by its
/// weight. f_pl enters reshaped to S x S x C.
class AdaptiveWeighting {
 public:
  AdaptiveWeighting() = default;
  /// `mlp` must end in 3 outputs. Throws when C is not divisible by 4.
  AdaptiveWeighting(std::size_t grid_size, std::size_t channels, nn::MlpSpec mlp, std::uint64_t seed);

  [[nodiscard]] AwOutput forward(const nn::Var& f_il, const nn::Var& f_bl, const nn::Var& f_pl) const;
  [[nodiscard]] std::vector<nn::Var> parameters() const;
  [[nodiscard]] AdaptiveWeighting clone() const;
  [[nodiscard]] nn::Mlp& mlp() { return mlp_; }
  [[nodiscard]] const nn::Mlp& mlp() const { return mlp_; }
  [[nodiscard]] std::size_t grid_size() const { return s_; }
  [[nodiscard]] std::size_t channels() const { return c_; }
  /// Zeroes the last MLP layer so the weights start at exactly 1/3 each.
  void zero_output_layer();

 private:
  std::size_t s_ = 0, c_ = 0;
  nn::Linear reduce_img_, reduce_bev_, reduce_pt_;
  nn::Mlp mlp_;
};

struct AwResult {
  FeatureGrid img, bev;
  std::vector<double> pt;
  AwWeights weights;
};

AwResult adaptive_weighting(const AdaptiveWeighting& aw, const FeatureGrid& f_il, const FeatureGrid& f_bl,
                            std::span<const double> f_pl);

nn::Mat grid_to_mat(const FeatureGrid& g);
FeatureGrid mat_to_grid(const nn::Mat& m, std::size_t h, std::size_t w);

}  // namespace pcfuse
