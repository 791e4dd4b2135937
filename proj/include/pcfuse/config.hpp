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

// Run configuration: one JSON document with a fixed schema. Every key has a
// default; a config file and `a.b.c=value` overrides may only replace
// existing keys with values of the same kind.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcfuse/metrics.hpp"
#include "pcfuse/nn/gpen.hpp"
#include "pcfuse/pipeline.hpp"

namespace pcfuse {

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "kitti"
  std::size_t n_frames = 500;
  double max_tilt_deg = 5.0;
  SceneSpec scene{0, 0.0, 0.0, 1.65, 3, 0.4, 4.0, 0.02};
};

struct GpenSettings {
  nn::GpenSpec spec{};
  nn::GpenTrainConfig train{};
  std::size_t train_frames = 2000;
  /// Points fed to the network at evaluation time.
  std::size_t eval_points = 521;
  /// Trained model for bench-planes; empty means train one first.
  std::string checkpoint;
};

struct EvalSettings {
  IouKind iou_kind = IouKind::ThreeD;
  double iou_threshold = 0.7;
  Interpolation interpolation = Interpolation::Eleven;
  std::string difficulty = "all";  // all, easy, moderate, hard
  std::string detections_dir;      // KITTI-layout label files with scores
  std::string class_name = "Car";
};

struct DemoSettings {
  std::size_t train_frames = 40;
  std::size_t eval_frames = 20;
  double heading_noise_deg = 10.0;
  double max_tilt_deg = 2.0;
  SceneSpec scene{0, 0.0, 0.0, 1.65, 1, 0.0, 4.0, 0.0};
  // Detection region shared by the BEV grid and the anchor lattice.
  double x_min = -20.0, x_max = 20.0;
  double z_min = 0.0, z_max = 40.0;
  std::vector<SizePrior> size_priors{SizePrior{3.9, 1.6, 1.56}, SizePrior{3.0, 3.0, 1.56}};
};

struct ClusterSettings {
  std::size_t k = 2;
  int iterations = 50;
};

struct RunConfig {
  std::string data_dir;
  std::string output_dir = "out";
  DatasetConfig dataset{};
  BevConfig bev{};
  RansacConfig ransac{};
  nn::AdamConfig adam{};
  AnchorConfig anchors{};
  PipelineConfig pipeline{};  // fusion, head and threshold settings
  GpenSettings gpen{};
  EvalSettings eval{};
  DemoSettings demo{};
  ClusterSettings cluster{};
  bool deterministic = false;  // suppress timing columns
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  /// Component validation; throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Throws ConfigError for unknown keys or wrong value kinds.
RunConfig from_json(const nlohmann::json& j);

/// Defaults, then the file (when non-empty), then each `dot.path=value`
/// override. Values are parsed as JSON and fall back to plain strings.
/// Referenced input paths must exist.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

/// Pipeline settings with the run-level BEV, anchor, RANSAC, Adam, seed and
/// worker settings applied, and the demo region and size priors on top.
PipelineConfig demo_pipeline_config(const RunConfig& cfg);

}  // namespace pcfuse
