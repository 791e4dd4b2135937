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

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pcfuse/boxes.hpp"
#include "pcfuse/geometry.hpp"

namespace pcfuse {

enum class FitMethod { Naive, LeastSquares, PCA, RANSAC, GPEN };

std::string_view to_string(FitMethod m);

struct FitReport {
  Plane plane = Plane::from_coefficients(0.0, -1.0, 0.0, -1.65);
  FitMethod method = FitMethod::Naive;
  double elapsed = 0.0;  // seconds
  std::optional<std::size_t> inlier_count;  // RANSAC only
};

struct RansacConfig {
  int iterations = 200;
  double inlier_threshold = 0.05;   // meters
  double min_inlier_fraction = 0.2;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Which residual the least-squares fitter minimises.
enum class LsResidual {
  /// Perpendicular point-to-plane distance (total least squares). Solved
  /// through an SVD of the centered design matrix.
  Orthogonal,
  /// Vertical residual y - (alpha*x + beta*z + gamma), ordinary least squares.
  Vertical,
};

/// The flat KITTI plane [0, -1, 0, 1.65] in canonical form.
Plane fit_naive();

/// Throws std::invalid_argument for fewer than three points and
/// DegenerateGeometry for collinear (rank-deficient) sets.
Plane fit_least_squares(const PointCloud& cloud, LsResidual residual = LsResidual::Orthogonal);

/// Normal is the eigenvector of the 3x3 scatter matrix with the smallest
/// eigenvalue; the offset passes through the centroid. Same errors as
/// fit_least_squares, plus DegenerateGeometry("ambiguous plane") when the two
/// smallest eigenvalues coincide.
Plane fit_pca(const PointCloud& cloud);

/// Best of `iterations` random three-point hypotheses scored by inlier
/// count, refit with fit_pca on the winning inlier set. Deterministic given
/// the seed. Throws DegenerateGeometry when no hypothesis reaches
/// min_inlier_fraction.
FitReport fit_ransac(const PointCloud& cloud, const RansacConfig& cfg);

/// Pseudo ground label from annotated boxes: gather the 4m bottom corners,
/// decenter by their mean, take the right singular vector of the smallest
/// singular value as the normal and d = normal . mean.
Plane pseudo_ground_label(std::span<const Box3D> boxes);

/// RMSE of normal angles in degrees.
double rmse_angle(std::span<const Plane> preds, std::span<const Plane> labels);

/// RMSE of |d_pred| - |d_label| in meters.
double rmse_height(std::span<const Plane> preds, std::span<const Plane> labels);

}  // namespace pcfuse
