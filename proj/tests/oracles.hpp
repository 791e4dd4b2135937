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

// Brute-force reference implementations used by the unit and acceptance
// tests. They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "pcfuse/bev.hpp"
#include "pcfuse/boxes.hpp"
#include "pcfuse/geometry.hpp"
#include "pcfuse/iou.hpp"
#include "pcfuse/metrics.hpp"

namespace oracle {

using pcfuse::Box3D;

/// Is (x, z) inside the yaw-only footprint of b?
inline bool in_footprint(const Box3D& b, double x, double z) {
  const double dx = x - b.center.x();
  const double dz = z - b.center.z();
  const double along = dx * std::sin(b.yaw) + dz * std::cos(b.yaw);
  const double across = dx * std::cos(b.yaw) - dz * std::sin(b.yaw);
  return std::abs(along) <= 0.5 * b.length && std::abs(across) <= 0.5 * b.width;
}

/// Monte-Carlo BEV IoU: n samples uniform over a's footprint estimate the
/// intersection area.
inline double mc_iou_bev(const Box3D& a, const Box3D& b, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double along = u(rng) * a.length;
    const double across = u(rng) * a.width;
    const double x = a.center.x() + along * std::sin(a.yaw) + across * std::cos(a.yaw);
    const double z = a.center.z() + along * std::cos(a.yaw) - across * std::sin(a.yaw);
    if (in_footprint(b, x, z)) ++hits;
  }
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  const double inter = area_a * static_cast<double>(hits) / static_cast<double>(n);
  return inter / (area_a + area_b - inter);
}

/// Suppression matrix first, then a greedy sweep in score order.
inline std::vector<std::size_t> nms(const std::vector<pcfuse::ScoredBox>& dets, double thresh) {
  const std::size_t n = dets.size();
  std::vector<std::vector<bool>> overlaps(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) overlaps[i][j] = pcfuse::iou_bev(dets[i].box, dets[j].box) > thresh;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Insertion sort keeps equal scores in index order.
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = i; j > 0 && dets[order[j]].score > dets[order[j - 1]].score; --j) std::swap(order[j], order[j - 1]);
  }
  std::vector<bool> removed(n, false);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    if (removed[i]) continue;
    kept.push_back(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && overlaps[i][j]) removed[j] = true;
    }
  }
  return kept;
}

struct ScoredDet {
  Box3D box;
  double score = 0.0;
};

/// Number of true positives among detections with score >= t, matching
/// greedily in descending score against each frame's gts.
inline std::size_t true_positives_at(const std::vector<std::vector<ScoredDet>>& dets,
                                     const std::vector<std::vector<Box3D>>& gts, double t, pcfuse::IouKind kind,
                                     double iou_thresh, std::size_t* n_kept) {
  std::size_t tp = 0;
  for (std::size_t f = 0; f < dets.size(); ++f) {
    std::vector<ScoredDet> kept;
    for (const auto& d : dets[f]) {
      if (d.score >= t) kept.push_back(d);
    }
    *n_kept += kept.size();
    std::stable_sort(kept.begin(), kept.end(), [](const ScoredDet& a, const ScoredDet& b) { return a.score > b.score; });
    std::vector<bool> used(gts[f].size(), false);
    for (const auto& d : kept) {
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < gts[f].size(); ++g) {
        if (used[g]) continue;
        const double v = pcfuse::box_iou(d.box, gts[f][g], kind);
        if (v >= iou_thresh && v > best_iou) {
          best = static_cast<int>(g);
          best_iou = v;
        }
      }
      if (best >= 0) {
        used[static_cast<std::size_t>(best)] = true;
        ++tp;
      }
    }
  }
  return tp;
}

/// 11-point AP from precision and recall evaluated at every distinct score.
inline double ap_all_thresholds(const std::vector<std::vector<ScoredDet>>& dets, const std::vector<std::vector<Box3D>>& gts,
                                pcfuse::IouKind kind, double iou_thresh) {
  std::size_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.size();
  std::vector<double> scores;
  for (const auto& f : dets) {
    for (const auto& d : f) scores.push_back(d.score);
  }
  if (n_gt == 0) return scores.empty() ? 1.0 : 0.0;
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<std::pair<double, double>> pr;
  for (double t : scores) {
    std::size_t kept = 0;
    const std::size_t tp = true_positives_at(dets, gts, t, kind, iou_thresh, &kept);
    pr.emplace_back(static_cast<double>(tp) / static_cast<double>(n_gt), static_cast<double>(tp) / static_cast<double>(kept));
  }
  double sum = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double r = i / 10.0;
    double best = 0.0;
    for (const auto& [rec, prec] : pr) {
      if (rec >= r - 1e-12) best = std::max(best, prec);
    }
    sum += best;
  }
  return sum / 11.0;
}

/// Per-cell loop over all points.
inline pcfuse::BevMaps rasterize(const pcfuse::PointCloud& cloud, const pcfuse::Plane& plane, const pcfuse::BevConfig& cfg) {
  const std::size_t rows = cfg.rows();
  const std::size_t cols = cfg.cols();
  const auto n = static_cast<std::size_t>(cfg.n_slices);
  pcfuse::BevMaps m{pcfuse::FeatureGrid(rows, cols, 1), pcfuse::FeatureGrid(rows, cols, n)};
  const double dz = cfg.slice_height();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x0 = cfg.x_min + static_cast<double>(r) * cfg.cell;
      const double z0 = cfg.z_min + static_cast<double>(c) * cfg.cell;
      std::size_t count = 0;
      for (const auto& p : cloud.points()) {
        if (p.x() < x0 || p.x() >= x0 + cfg.cell || p.z() < z0 || p.z() >= z0 + cfg.cell) continue;
        if (p.x() >= cfg.x_max || p.z() >= cfg.z_max) continue;
        const double h = pcfuse::signed_distance(plane, p);
        if (h < cfg.band_lo || h >= cfg.band_hi) continue;
        ++count;
        const double above = h - cfg.band_lo;
        const auto s = std::min(n - 1, static_cast<std::size_t>(std::floor(above / dz)));
        const double v = cfg.absolute_heights ? above : above - static_cast<double>(s) * dz;
        m.heights.at(r, c, s) = std::max(m.heights.at(r, c, s), v);
      }
      m.density.at(r, c, 0) = std::min(1.0, std::log(static_cast<double>(count) + 1.0) / std::log(cfg.density_log_base));
    }
  }
  return m;
}

inline Box3D random_box(std::mt19937_64& rng, double spread = 10.0) {
  std::uniform_real_distribution<double> pos(-spread, spread);
  std::uniform_real_distribution<double> size(0.5, 5.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  Box3D b;
  b.center = pcfuse::Point3(pos(rng), 1.0 + 0.2 * pos(rng) / spread, 20.0 + pos(rng));
  b.length = size(rng);
  b.width = size(rng);
  b.height = 1.0 + 0.2 * size(rng);
  b.yaw = ang(rng);
  return b;
}

/// A box near `b`: shifted, resized and turned by small random amounts.
inline Box3D jitter(const Box3D& b, std::mt19937_64& rng, double amount) {
  std::normal_distribution<double> n(0.0, amount);
  Box3D j = b;
  j.center += pcfuse::Point3(n(rng), 0.2 * n(rng), n(rng));
  j.length *= std::exp(0.3 * n(rng));
  j.width *= std::exp(0.3 * n(rng));
  j.height *= std::exp(0.3 * n(rng));
  j.yaw += n(rng);
  return j;
}

struct EvalScene {
  std::vector<std::vector<ScoredDet>> dets;
  std::vector<std::vector<Box3D>> gts;
};

/// A few frames of well separated gts with jittered detections, duplicates,
/// misses, stray false positives and tied scores.
inline EvalScene random_eval_scene(std::uint64_t seed, std::size_t n_frames = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EvalScene s;
  for (std::size_t f = 0; f < n_frames; ++f) {
    std::vector<Box3D> gts;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      Box3D b = random_box(rng, 2.0);
      b.center.x() += 12.0 * i;
      gts.push_back(b);
    }
    std::vector<ScoredDet> dets;
    for (const auto& g : gts) {
      const int copies = count(rng) % 3;
      for (int c = 0; c < copies; ++c) dets.push_back({jitter(g, rng, 0.15 * u(rng)), std::round(u(rng) * 20.0) / 20.0});
    }
    const int stray = count(rng) % 3;
    for (int i = 0; i < stray; ++i) dets.push_back({random_box(rng, 30.0), std::round(u(rng) * 20.0) / 20.0});
    s.gts.push_back(std::move(gts));
    s.dets.push_back(std::move(dets));
  }
  return s;
}

}  // namespace oracle
