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

#include "pcfuse/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "pcfuse/iou.hpp"

namespace pcfuse {

namespace {

std::size_t lattice_count(double lo, double hi, double stride) {
  return static_cast<std::size_t>(std::floor((hi - lo) / stride + 1e-9)) + 1;
}

}  // namespace

void AnchorConfig::validate() const {
  if (!(stride > 0.0)) throw std::invalid_argument("anchor stride must be positive");
  if (sizes.empty() || orientations.empty()) throw std::invalid_argument("anchor sizes and orientations must be nonempty");
  if (x_max < x_min || z_max < z_min) throw std::invalid_argument("anchor extents are inverted");
  for (const auto& s : sizes) {
    if (!(s.length > 0.0 && s.width > 0.0 && s.height > 0.0)) throw std::invalid_argument("size priors must be positive");
  }
}

std::size_t AnchorConfig::lattice_x() const { return lattice_count(x_min, x_max, stride); }
std::size_t AnchorConfig::lattice_z() const { return lattice_count(z_min, z_max, stride); }

AnchorGrid gen_anchors(const Plane& plane, const AnchorConfig& cfg) {
  cfg.validate();
  AnchorGrid grid;
  grid.stride = cfg.stride;
  grid.orientations = cfg.orientations;
  grid.size_priors = cfg.sizes;
  const Vec3& n = plane.normal();
  const std::size_t nx = cfg.lattice_x();
  const std::size_t nz = cfg.lattice_z();
  grid.anchors.reserve(nx * nz * cfg.sizes.size() * cfg.orientations.size());
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = cfg.x_min + static_cast<double>(i) * cfg.stride;
    for (std::size_t j = 0; j < nz; ++j) {
      const double z = cfg.z_min + static_cast<double>(j) * cfg.stride;
      const double y = (plane.offset() - n.x() * x - n.z() * z) / n.y();
      for (const auto& s : cfg.sizes) {
        for (double yaw : cfg.orientations) {
          grid.anchors.push_back(box_on_ground(Point3(x, y, z), s.length, s.width, s.height, yaw, n));
        }
      }
    }
  }
  return grid;
}

std::size_t RpnTargets::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), AnchorLabel::Positive));
}

RpnDelta encode_rpn(const Box3D& anchor, const Box3D& gt, SizeEncoding enc) {
  const Vec3 ea = axis_aligned_extents(anchor);
  const Vec3 eg = axis_aligned_extents(gt);
  RpnDelta d{};
  for (int k = 0; k < 3; ++k) {
    d[k] = gt.center[k] - anchor.center[k];
    d[3 + k] = enc == SizeEncoding::Raw ? eg[k] - ea[k] : std::log(eg[k] / ea[k]);
  }
  return d;
}

Box3D decode_rpn(const Box3D& anchor, const RpnDelta& delta, SizeEncoding enc) {
  const Vec3 ea = axis_aligned_extents(anchor);
  Vec3 e;
  for (int k = 0; k < 3; ++k) e[k] = enc == SizeEncoding::Raw ? ea[k] + delta[3 + k] : ea[k] * std::exp(delta[3 + k]);
  Box3D b;
  b.center = anchor.center + Vec3(delta[0], delta[1], delta[2]);
  b.width = std::max(e.x(), 1e-3);
  b.height = std::max(e.y(), 1e-3);
  b.length = std::max(e.z(), 1e-3);
  b.yaw = 0.0;
  return b;
}

RpnTargets assign_rpn_targets(std::span<const Box3D> anchors, std::span<const Box3D> gts, const RpnThresholds& th,
                              SizeEncoding enc) {
  RpnTargets t;
  t.labels.assign(anchors.size(), AnchorLabel::Negative);
  t.matched_gt.assign(anchors.size(), -1);
  t.reg_targets.assign(anchors.size(), RpnDelta{});
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    int arg = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou_bev(anchors[a], gts[g]);
      if (arg < 0 || v > best) {
        best = v;
        arg = static_cast<int>(g);
      }
    }
    if (arg < 0 || best < th.negative) continue;
    if (best >= th.positive) {
      t.labels[a] = AnchorLabel::Positive;
      t.matched_gt[a] = arg;
      t.reg_targets[a] = encode_rpn(anchors[a], gts[static_cast<std::size_t>(arg)], enc);
    } else {
      t.labels[a] = AnchorLabel::Ignore;
    }
  }
  return t;
}

std::vector<SizePrior> cluster_sizes(std::span<const Box3D> boxes, std::size_t k, std::uint64_t seed, int max_iterations) {
  if (k == 0) throw std::invalid_argument("cluster count must be positive");
  if (boxes.size() < k) throw std::invalid_argument("fewer boxes than clusters");
  std::vector<Vec3> pts;
  pts.reserve(boxes.size());
  for (const auto& b : boxes) pts.emplace_back(b.length, b.width, b.height);

  std::mt19937_64 rng(seed);
  std::vector<Vec3> centers;
  centers.push_back(pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)]);
  std::vector<double> d2(pts.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) m = std::min(m, (pts[i] - c).squaredNorm());
      d2[i] = m;
      total += m;
    }
    if (total <= 0.0) {
      centers.push_back(centers.back());
      continue;
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r -= d2[i];
      if (r < 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }

  std::vector<std::size_t> assign(pts.size(), 0);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if ((pts[i] - centers[c]).squaredNorm() < (pts[i] - centers[best]).squaredNorm()) best = c;
      }
      if (best != assign[i]) changed = true;
      assign[i] = best;
    }
    if (!changed) break;
    std::vector<Vec3> sum(k, Vec3::Zero());
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum[assign[i]] += pts[i];
      ++cnt[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (cnt[c] > 0) centers[c] = sum[c] / static_cast<double>(cnt[c]);
    }
  }
  std::stable_sort(centers.begin(), centers.end(), [](const Vec3& a, const Vec3& b) { return a.prod() > b.prod(); });
  std::vector<SizePrior> out;
  for (const auto& c : centers) out.push_back(SizePrior{c.x(), c.y(), c.z()});
  return out;
}

}  // namespace pcfuse
