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

#include "pcfuse/iou.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pcfuse {

namespace {

constexpr double kSnap = 1e-12;

using Vec2 = Eigen::Vector2d;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<Vec2> ccw(std::span<const Vec2> poly) {
  std::vector<Vec2> out(poly.begin(), poly.end());
  if (polygon_area(out) < 0.0) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace

double polygon_area(std::span<const Vec2> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * s;
}

double convex_intersection_area(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  if (subject.size() < 3 || clip.size() < 3) return 0.0;
  std::vector<Vec2> out = ccw(subject);
  const std::vector<Vec2> c = ccw(clip);
  std::vector<Vec2> in;
  for (std::size_t e = 0; e < c.size() && !out.empty(); ++e) {
    const Vec2& a = c[e];
    const Vec2 edge = c[(e + 1) % c.size()] - a;
    const double scale = std::max(1.0, edge.norm());
    auto side = [&](const Vec2& p) {
      const double s = cross(edge, p - a) / scale;
      return std::abs(s) <= kSnap ? 0.0 : s;
    };
    in.swap(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % in.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  if (out.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(out));
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const auto fa = bev_footprint(a);
  const auto fb = bev_footprint(b);
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  const double dx = a.center.x() - b.center.x();
  const double dz = a.center.z() - b.center.z();
  if (dx * dx + dz * dz > reach * reach) return 0.0;
  const double inter = convex_intersection_area(fa, fb);
  const double uni = a.length * a.width + b.length * b.width - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double overlap = std::min(a.y_bottom(), b.y_bottom()) - std::max(a.y_top(), b.y_top());
  if (overlap <= 0.0) return 0.0;
  const auto fa = bev_footprint(a);
  const auto fb = bev_footprint(b);
  const double inter = convex_intersection_area(fa, fb) * overlap;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms(std::span<const ScoredBox> dets, double iou_thresh) {
  for (const auto& d : dets) {
    if (!std::isfinite(d.score)) throw std::invalid_argument("nms scores must be finite");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return dets[i].score > dets[j].score; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (iou_bev(dets[k].box, dets[i].box) > iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  return kept;
}

}  // namespace pcfuse
