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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pcfuse/boxes.hpp"

namespace pcfuse {

struct Detection {
  Box3D box;
  double score = 0.0;
  int frame_id = 0;
};

enum class IouKind { Bev, ThreeD };

double box_iou(const Box3D& a, const Box3D& b, IouKind kind);

struct MatchResult {
  std::vector<int> det_to_gt;  // -1 for a false positive
  std::vector<bool> gt_matched;
};

/// Greedy matching in descending score (input order among equal scores).
/// Each detection takes the unmatched gt with the highest IoU >= thresh,
/// lowest index on ties.
MatchResult match_detections(std::span<const Detection> dets, std::span<const Box3D> gts, IouKind kind, double thresh);

/// Contribution of one detection to the ranked list.
struct Outcome {
  double score = 0.0;
  bool tp = false;
  double heading_similarity = 0.0;  // (1 + cos(dyaw)) / 2 for a TP
};

double heading_similarity(double det_yaw, double gt_yaw);

enum class Interpolation { Eleven, Forty };

struct PrCurve {
  std::vector<std::pair<double, double>> points;  // (recall, precision), recall nondecreasing
  double ap = 0.0;
};

/// Ranks outcomes by score and emits one PR point per group of equal
/// scores. With `heading`, each TP counts its heading similarity instead of
/// 1. n_gt = 0 gives AP 1 when there are no detections and 0 otherwise.
PrCurve pr_curve(std::span<const Outcome> outcomes, std::size_t n_gt, Interpolation interp = Interpolation::Eleven,
                 bool heading = false);

double average_precision(std::span<const Outcome> outcomes, std::size_t n_gt,
                         Interpolation interp = Interpolation::Eleven);
double average_heading_similarity(std::span<const Outcome> outcomes, std::size_t n_gt,
                                  Interpolation interp = Interpolation::Eleven);

/// Interpolated AP of an arbitrary PR point list.
double interpolated_ap(std::span<const std::pair<double, double>> points, Interpolation interp);

/// KITTI label metadata used for difficulty buckets.
struct LabelMeta {
  double truncation = 0.0;
  int occlusion = 0;
  double bbox_height = 1e9;  // pixels
};

enum class Difficulty { Easy, Moderate, Hard };

bool in_bucket(const LabelMeta& m, Difficulty d);

struct FrameData {
  int frame_id = 0;
  std::vector<Detection> dets;
  std::vector<Box3D> gts;
  std::vector<LabelMeta> meta;  // empty or one per gt
};

struct EvalSummary {
  double ap = 0.0;
  double ahs = 0.0;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::size_t tp = 0;
  PrCurve curve;
};

/// Frames are processed in frame_id order. With a difficulty, gts outside
/// the bucket are neither required nor counted, and detections matched to
/// them are dropped.
EvalSummary evaluate(std::span<const FrameData> frames, IouKind kind, double thresh,
                     Interpolation interp = Interpolation::Eleven, std::optional<Difficulty> difficulty = std::nullopt);

std::string pr_csv(const PrCurve& curve);
nlohmann::json summary_json(const EvalSummary& s);

}  // namespace pcfuse
