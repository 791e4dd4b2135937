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

#include "pcfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pcfuse/iou.hpp"

namespace pcfuse {

double box_iou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::Bev ? iou_bev(a, b) : iou_3d(a, b);
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const Box3D> gts, IouKind kind, double thresh) {
  MatchResult r;
  r.det_to_gt.assign(dets.size(), -1);
  r.gt_matched.assign(gts.size(), false);
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return dets[i].score > dets[j].score; });
  for (std::size_t d : order) {
    int best = -1;
    double best_iou = thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_matched[g]) continue;
      const double v = box_iou(dets[d].box, gts[g], kind);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      r.det_to_gt[d] = best;
      r.gt_matched[static_cast<std::size_t>(best)] = true;
    }
  }
  return r;
}

double heading_similarity(double det_yaw, double gt_yaw) { return 0.5 * (1.0 + std::cos(det_yaw - gt_yaw)); }

double interpolated_ap(std::span<const std::pair<double, double>> points, Interpolation interp) {
  const int n = interp == Interpolation::Eleven ? 11 : 40;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = interp == Interpolation::Eleven ? i / 10.0 : (i + 1) / 40.0;
    double best = 0.0;
    for (const auto& [rec, prec] : points) {
      if (rec >= r - 1e-12) best = std::max(best, prec);
    }
    sum += best;
  }
  return sum / n;
}

PrCurve pr_curve(std::span<const Outcome> outcomes, std::size_t n_gt, Interpolation interp, bool heading) {
  PrCurve c;
  if (n_gt == 0) {
    c.ap = outcomes.empty() ? 1.0 : 0.0;
    return c;
  }
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return outcomes[i].score > outcomes[j].score; });
  double tp = 0.0;
  double credit = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Outcome& o = outcomes[order[k]];
    if (o.tp) {
      tp += 1.0;
      credit += heading ? o.heading_similarity : 1.0;
    }
    const bool group_end = k + 1 == order.size() || outcomes[order[k + 1]].score != o.score;
    if (!group_end) continue;
    const double recall = tp / static_cast<double>(n_gt);
    const double precision = credit / static_cast<double>(k + 1);
    c.points.emplace_back(std::min(recall, 1.0), precision);
  }
  c.ap = interpolated_ap(c.points, interp);
  return c;
}

double average_precision(std::span<const Outcome> outcomes, std::size_t n_gt, Interpolation interp) {
  return pr_curve(outcomes, n_gt, interp, false).ap;
}

double average_heading_similarity(std::span<const Outcome> outcomes, std::size_t n_gt, Interpolation interp) {
  return pr_curve(outcomes, n_gt, interp, true).ap;
}

bool in_bucket(const LabelMeta& m, Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return m.bbox_height >= 40.0 && m.occlusion <= 0 && m.truncation <= 0.15;
    case Difficulty::Moderate: return m.bbox_height >= 25.0 && m.occlusion <= 1 && m.truncation <= 0.30;
    case Difficulty::Hard: return m.bbox_height >= 25.0 && m.occlusion <= 2 && m.truncation <= 0.50;
  }
  return false;
}

EvalSummary evaluate(std::span<const FrameData> frames, IouKind kind, double thresh, Interpolation interp,
                     std::optional<Difficulty> difficulty) {
  std::vector<const FrameData*> sorted;
  for (const auto& f : frames) sorted.push_back(&f);
  std::stable_sort(sorted.begin(), sorted.end(), [](const FrameData* a, const FrameData* b) { return a->frame_id < b->frame_id; });

  EvalSummary s;
  std::vector<Outcome> outcomes;
  for (const FrameData* f : sorted) {
    if (!f->meta.empty() && f->meta.size() != f->gts.size()) throw std::invalid_argument("label metadata must match gts");
    const MatchResult m = match_detections(f->dets, f->gts, kind, thresh);
    std::vector<bool> counted(f->gts.size(), true);
    if (difficulty && !f->meta.empty()) {
      for (std::size_t g = 0; g < f->gts.size(); ++g) counted[g] = in_bucket(f->meta[g], *difficulty);
    }
    s.n_gt += static_cast<std::size_t>(std::count(counted.begin(), counted.end(), true));
    for (std::size_t d = 0; d < f->dets.size(); ++d) {
      const int g = m.det_to_gt[d];
      if (g >= 0 && !counted[static_cast<std::size_t>(g)]) continue;
      Outcome o;
      o.score = f->dets[d].score;
      o.tp = g >= 0;
      if (o.tp) o.heading_similarity = heading_similarity(f->dets[d].box.yaw, f->gts[static_cast<std::size_t>(g)].yaw);
      outcomes.push_back(o);
    }
  }
  s.n_det = outcomes.size();
  s.tp = static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const Outcome& o) { return o.tp; }));
  s.curve = pr_curve(outcomes, s.n_gt, interp, false);
  s.ap = s.curve.ap;
  s.ahs = average_heading_similarity(outcomes, s.n_gt, interp);
  return s;
}

std::string pr_csv(const PrCurve& curve) {
  std::ostringstream out;
  out << "recall,precision\n";
  char buf[96];
  for (const auto& [r, p] : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r, p);
    out << buf;
  }
  return out.str();
}

nlohmann::json summary_json(const EvalSummary& s) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [r, p] : s.curve.points) pts.push_back({r, p});
  return {{"ap", s.ap}, {"ahs", s.ahs}, {"n_gt", s.n_gt}, {"n_det", s.n_det}, {"tp", s.tp}, {"pr", pts}};
}

}  // namespace pcfuse
