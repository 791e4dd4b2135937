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

#include "pcfuse/plane_fit.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "pcfuse/errors.hpp"

namespace pcfuse {

namespace {

constexpr double kAmbiguityTol = 1e-9;

void require_fit_input(const PointCloud& cloud) {
  if (cloud.size() < 3) throw std::invalid_argument("plane fit needs at least 3 points");
}

Point3 centroid(std::span<const Point3> pts) {
  Point3 c = Point3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

// Smallest-singular-value direction of the centered N x 3 matrix.
Vec3 smallest_singular_direction(std::span<const Point3> pts, const Point3& mean) {
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) centered.row(static_cast<Eigen::Index>(i)) = (pts[i] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();  // descending
  if (s.size() < 3 || s(0) == 0.0 || s(1) - s(2) <= kAmbiguityTol * s(0)) {
    throw DegenerateGeometry("ambiguous plane: two smallest singular values coincide");
  }
  return svd.matrixV().col(2);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string_view to_string(FitMethod m) {
  switch (m) {
    case FitMethod::Naive: return "naive";
    case FitMethod::LeastSquares: return "ls";
    case FitMethod::PCA: return "pca";
    case FitMethod::RANSAC: return "ransac";
    case FitMethod::GPEN: return "gpen";
  }
  return "unknown";
}

void RansacConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("RANSAC needs at least one iteration");
  if (!(inlier_threshold > 0.0)) throw std::invalid_argument("RANSAC inlier threshold must be positive");
  if (!(min_inlier_fraction > 0.0 && min_inlier_fraction <= 1.0)) {
    throw std::invalid_argument("RANSAC min_inlier_fraction must be in (0, 1]");
  }
}

Plane fit_naive() { return Plane::from_coefficients(0.0, -1.0, 0.0, -1.65); }

Plane fit_least_squares(const PointCloud& cloud, LsResidual residual) {
  require_fit_input(cloud);
  const auto& pts = cloud.points();
  const Point3 mean = centroid(pts);
  if (residual == LsResidual::Orthogonal) {
    const Vec3 n = smallest_singular_direction(pts, mean);
    return Plane::from_coefficients(n.x(), n.y(), n.z(), n.dot(mean));
  }
  // y - y_mean = alpha (x - x_mean) + beta (z - z_mean)
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = pts[i].x() - mean.x();
    a(r, 1) = pts[i].z() - mean.z();
    rhs(r) = pts[i].y() - mean.y();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < 2) throw DegenerateGeometry("points are collinear in the ground plane");
  const Eigen::Vector2d ab = qr.solve(rhs);
  // alpha x - y + beta z = alpha x0 - y0 + beta z0
  const Vec3 n(ab(0), -1.0, ab(1));
  return Plane::from_coefficients(n.x(), n.y(), n.z(), n.dot(mean));
}

Plane fit_pca(const PointCloud& cloud) {
  require_fit_input(cloud);
  const auto& pts = cloud.points();
  const Point3 mean = centroid(pts);
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();  // ascending
  if (lambda(2) == 0.0 || lambda(1) - lambda(0) <= kAmbiguityTol * lambda(2)) {
    throw DegenerateGeometry("ambiguous plane: two smallest eigenvalues coincide");
  }
  const Vec3 n = eig.eigenvectors().col(0);
  return Plane::from_coefficients(n.x(), n.y(), n.z(), n.dot(mean));
}

FitReport fit_ransac(const PointCloud& cloud, const RansacConfig& cfg) {
  cfg.validate();
  require_fit_input(cloud);
  const auto t0 = std::chrono::steady_clock::now();
  const auto& pts = cloud.points();
  const std::size_t n = pts.size();

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::size_t best_count = 0;
  Vec3 best_normal = Vec3::Zero();
  double best_offset = 0.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    std::size_t k = pick(rng);
    if (i == j || j == k || i == k) continue;
    Vec3 normal = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
    const double len = normal.norm();
    if (len < 1e-12) continue;
    normal /= len;
    const double offset = normal.dot(pts[i]);
    std::size_t count = 0;
    for (const auto& p : pts) {
      if (std::abs(normal.dot(p) - offset) <= cfg.inlier_threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }

  const auto required = static_cast<std::size_t>(std::ceil(cfg.min_inlier_fraction * static_cast<double>(n)));
  if (best_count < 3 || best_count < required) {
    throw DegenerateGeometry("RANSAC found no hypothesis with enough inliers");
  }

  std::vector<std::size_t> inliers;
  inliers.reserve(best_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(best_normal.dot(pts[i]) - best_offset) <= cfg.inlier_threshold) inliers.push_back(i);
  }

  FitReport report;
  report.plane = fit_pca(cloud.select(inliers));
  report.method = FitMethod::RANSAC;
  report.inlier_count = inliers.size();
  report.elapsed = seconds_since(t0);
  return report;
}

Plane pseudo_ground_label(std::span<const Box3D> boxes) {
  if (boxes.empty()) throw std::invalid_argument("pseudo ground label needs at least one box");
  std::vector<Point3> corners;
  corners.reserve(4 * boxes.size());
  for (const auto& b : boxes) {
    for (const auto& c : bottom_corners(b)) corners.push_back(c);
  }
  const Point3 mean = centroid(corners);
  const Vec3 n = smallest_singular_direction(corners, mean);
  return Plane::from_coefficients(n.x(), n.y(), n.z(), n.dot(mean));
}

namespace {

void require_paired(std::span<const Plane> preds, std::span<const Plane> labels) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw std::invalid_argument("prediction and label lists must have equal nonzero length");
  }
}

}  // namespace

double rmse_angle(std::span<const Plane> preds, std::span<const Plane> labels) {
  require_paired(preds, labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double a = normal_angle_deg(preds[i], labels[i]);
    sum += a * a;
  }
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

double rmse_height(std::span<const Plane> preds, std::span<const Plane> labels) {
  require_paired(preds, labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i].height() - labels[i].height();
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

}  // namespace pcfuse
