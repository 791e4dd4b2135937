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

// File formats: KITTI velodyne scans, plain-text clouds, KITTI calibration
// and label files, and flat float32 tensors with a JSON header.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcfuse/boxes.hpp"
#include "pcfuse/feature_grid.hpp"
#include "pcfuse/geometry.hpp"
#include "pcfuse/metrics.hpp"

namespace pcfuse {

/// Little-endian float32 records x, y, z, reflectance. Throws DataError.
PointCloud read_velodyne_bin(const std::string& path);
void write_velodyne_bin(const std::string& path, const PointCloud& cloud);

/// One "x y z [r]" line per point; blank lines and '#' comments skipped.
PointCloud read_text_cloud(const std::string& path);
void write_text_cloud(const std::string& path, const PointCloud& cloud);

struct KittiCalib {
  CameraModel camera;              // from P2
  RigidTransform velo_to_cam;      // R0_rect * Tr_velo_to_cam
};

/// Reads P2, R0_rect and Tr_velo_to_cam. Image size is not part of the
/// file, so the camera keeps the default width and height.
KittiCalib read_kitti_calib(const std::string& path);
void write_kitti_calib(const std::string& path, const KittiCalib& calib);

/// The fixed axis swap between the KITTI LiDAR frame (x forward, y left,
/// z up) and the camera frame, without any mounting offset.
RigidTransform kitti_axis_swap();

struct KittiLabel {
  std::string type = "Car";
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  double bbox[4] = {0.0, 0.0, 0.0, 0.0};  // left, top, right, bottom
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;       // bottom center, camera frame
  double ry = 0.0;
  std::optional<double> score;
};

std::vector<KittiLabel> read_kitti_labels(const std::string& path);
void write_kitti_labels(const std::string& path, const std::vector<KittiLabel>& labels);

/// KITTI location is the bottom-face center and ry = yaw - pi/2.
Box3D label_to_box(const KittiLabel& l);
/// Fills alpha from the viewing ray and the 2D box from the camera.
KittiLabel box_to_label(const Box3D& b, const CameraModel& cam, std::optional<double> score = std::nullopt,
                        const std::string& type = "Car");
LabelMeta label_meta(const KittiLabel& l);

/// Tensor container: `<stem>.json` holds {"shape", "dtype": "float32le",
/// plus any `extra` fields}; `<stem>.bin` holds the row-major data.
void write_tensor(const std::string& stem, const std::vector<std::size_t>& shape, std::span<const double> data,
                  const nlohmann::json& extra = nlohmann::json::object());

struct TensorFile {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  nlohmann::json header;
};
TensorFile read_tensor(const std::string& stem);

void write_grid(const std::string& stem, const FeatureGrid& g, const nlohmann::json& extra = nlohmann::json::object());
FeatureGrid read_grid(const std::string& stem);

/// Writes text atomically enough for our purposes; throws DataError.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pcfuse
