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

// Two-stage detector on synthetic scenes: plane fit, BEV maps, plane
// anchors, an MLP proposal head over BEV crops, then adaptive weighting,
// spatial fusion and refinement heads over synthetic backbone features.

#include <cstdint>
#include <string>
#include <vector>

#include "pcfuse/anchors.hpp"
#include "pcfuse/bev.hpp"
#include "pcfuse/fusion.hpp"
#include "pcfuse/metrics.hpp"
#include "pcfuse/nn/adam.hpp"
#include "pcfuse/nn/layers.hpp"
#include "pcfuse/nn/losses.hpp"
#include "pcfuse/plane_fit.hpp"
#include "pcfuse/scene.hpp"

namespace pcfuse {

struct RefineThresholds {
  double positive = 0.65;
  double negative = 0.55;
};

struct PipelineConfig {
  BevConfig bev{};
  AnchorConfig anchors{};
  FitMethod plane_method = FitMethod::RANSAC;
  RansacConfig ransac{};
  RpnThresholds rpn_iou{};
  RefineThresholds refine_iou{};
  SizeEncoding rpn_encoding = SizeEncoding::Raw;
  std::size_t proposals_train = 1024;
  std::size_t proposals_eval = 300;
  std::size_t rpn_pre_nms = 2000;
  double rpn_nms = 0.7;
  double nms_thresh = 0.01;
  double score_threshold = 0.0;
  std::size_t rpn_crop = 4;
  std::size_t rpn_batch = 128;     // anchors per training scene
  std::size_t refine_batch = 48;   // proposals per training scene
  SynthConfig synth{5, 16, true, 6.0, 32, 0};
  nn::MlpSpec rpn_mlp{{64, 64, 8}, nn::Activation::ReLU, false, 11};
  nn::MlpSpec aw_mlp{{32, 3}, nn::Activation::ReLU, false, 12};
  nn::MlpSpec head_mlp{{128, 128, 14}, nn::Activation::ReLU, false, 13};
  bool literal_point_max = false;
  nn::AdamConfig adam{};
  int rpn_epochs = 12;
  int refine_epochs = 60;
  nn::LossWeights weights{};
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

struct DetectorModel {
  nn::Mlp rpn;
  AdaptiveWeighting aw;
  nn::Mlp head;

  static DetectorModel create(const PipelineConfig& cfg);
};

/// Density followed by the height slices as one [rows, cols, 1 + n] grid.
FeatureGrid stack_bev(const BevMaps& maps);

/// One row per anchor: the stacked BEV maps cropped to the anchor footprint
/// and resized to crop x crop, then the anchor's x and z extents.
nn::Mat rpn_features(const FeatureGrid& bev, const BevConfig& cfg, std::span<const Box3D> anchors, std::size_t crop);

struct FrameStage {
  PointCloud cloud;  // FOV-filtered
  Plane plane;
  FeatureGrid bev;
  std::vector<Box3D> anchors;  // anchors with at least one occupied cell
};

FrameStage prepare_frame(const Scene& scene, const PipelineConfig& cfg);

struct Proposal {
  Box3D box;
  double score = 0.0;
};

/// Scores all anchors, keeps the best rpn_pre_nms, applies NMS at rpn_nms
/// and returns up to `cap` decoded proposals.
std::vector<Proposal> propose(const DetectorModel& m, const FrameStage& f, const PipelineConfig& cfg, std::size_t cap);

/// Per-proposal inputs of the refinement stage.
struct RefineInput {
  Box3D proposal;
  nn::Mat f_il, f_bl;  // (S*S) x C
  nn::Mat f_pl;        // 1 x (S*S*C)
  double azimuth = 0.0;
};

RefineInput refine_input(const Scene& scene, const Box3D& proposal, const PipelineConfig& cfg);

struct RefineGraph {
  nn::Var logits;   // n x 2
  nn::Var corners;  // n x 10 (corners then heights)
  nn::Var angle;    // n x 2
};

RefineGraph refine_forward(const DetectorModel& m, std::span<const RefineInput> inputs, const PipelineConfig& cfg);

struct TrainLog {
  std::vector<double> rpn_loss;     // mean per epoch
  std::vector<double> refine_loss;  // mean per epoch
};

TrainLog train_detector(DetectorModel& m, std::span<const Scene> scenes, const PipelineConfig& cfg);

struct DetectStats {
  std::size_t proposals = 0;
  std::size_t dropped_degenerate = 0;
};

std::vector<Detection> detect(const DetectorModel& m, const Scene& scene, const PipelineConfig& cfg, int frame_id,
                              DetectStats* stats = nullptr);

struct DemoResult {
  EvalSummary ap_3d;
  EvalSummary ap_bev;
  EvalSummary noisy_3d;  // same detections with heading noise
  TrainLog log;
  DetectStats stats;
  std::vector<FrameData> frames;
};

/// Trains on `train`, evaluates on `eval` at 3D and BEV IoU 0.7, and
/// repeats the 3D evaluation with Gaussian heading noise (degrees).
DemoResult run_pipeline_demo(const PipelineConfig& cfg, std::span<const Scene> train, std::span<const Scene> eval,
                             double heading_noise_deg = 10.0);

}  // namespace pcfuse
