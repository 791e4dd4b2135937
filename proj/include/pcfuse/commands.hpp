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

// Subcommands behind the pcfuse tool. Each writes its tables (CSV + JSON)
// and tensors under cfg.output_dir and returns a short stdout summary.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcfuse/config.hpp"
#include "pcfuse/io.hpp"

namespace pcfuse {

struct CommandArgs {
  std::string input;  // point cloud (.bin velodyne or text xyz)
  std::string calib;  // KITTI calib for a .bin input
  std::optional<std::array<double, 4>> plane;
};

/// One frame of a plane or detection dataset, in the camera frame.
struct DatasetFrame {
  int frame_id = 0;
  PointCloud cloud;  // FOV-filtered
  Plane plane_truth;
  std::vector<Box3D> gts;
  std::vector<LabelMeta> meta;
  CameraModel cam;
};

/// Synthetic frames come from random_specs(n, seed); KITTI frames from
/// <data_dir>/{velodyne,calib,label_2}. Unreadable KITTI frames are skipped
/// with a warning and counted. Throws DataError when nothing is left.
std::vector<DatasetFrame> load_frames(const RunConfig& cfg, std::size_t n, std::uint64_t seed, std::ostream& warn,
                                      std::size_t* skipped = nullptr);

std::string cmd_bench_planes(const RunConfig& cfg, std::ostream& warn);
std::string cmd_train_gpen(const RunConfig& cfg, std::ostream& warn);
std::string cmd_rasterize(const RunConfig& cfg, const CommandArgs& args);
std::string cmd_gen_anchors(const RunConfig& cfg, const CommandArgs& args);
std::string cmd_eval(const RunConfig& cfg, std::ostream& warn);
std::string cmd_pipeline_demo(const RunConfig& cfg);
std::string cmd_make_scenes(const RunConfig& cfg);
std::string cmd_cluster_sizes(const RunConfig& cfg, std::ostream& warn);

/// Exit code for an exception escaping a command: 1 config, 2 data,
/// 3 numerical or geometric failure.
int exit_code_for(const std::exception& e);

}  // namespace pcfuse
