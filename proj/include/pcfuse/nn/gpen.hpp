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

// Ground plane estimation network: a shared per-point MLP, a channel-wise
// max over points, and a fully-connected head regressing (a, b, c, d).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcfuse/geometry.hpp"
#include "pcfuse/nn/adam.hpp"
#include "pcfuse/nn/layers.hpp"
#include "pcfuse/nn/losses.hpp"

namespace pcfuse::nn {

struct GpenSpec {
  MlpSpec point_encoder{{64, 128, 256}, Activation::ReLU, true, 1};
  MlpSpec head{{128, 64, 4}, Activation::ReLU, false, 2};
  /// Fixed factor applied to xyz before the encoder.
  double input_scale = 0.1;
};

struct GpenModel {
  Mlp point_encoder;
  Mlp head;
  double input_scale = 0.1;

  static GpenModel create(const GpenSpec& spec);
  [[nodiscard]] std::vector<Var> parameters() const;
  [[nodiscard]] std::size_t feature_width() const { return point_encoder.output_width(); }
  [[nodiscard]] GpenModel clone() const;
};

struct GpenGraph {
  Var plane;           // 1 x 4, first three entries unit length
  Var point_features;  // k x C
};

/// Differentiable forward pass on a k x 3 point matrix.
GpenGraph gpen_forward_graph(const GpenModel& model, const Mat& points);

struct GpenOutput {
  Tensor plane_raw;       // [4]
  Tensor point_features;  // [k, C]
};

/// Throws NumericalError for NaN/Inf in the inputs or weights and
/// std::invalid_argument for an empty or non-[k,3] input.
GpenOutput gpen_forward(const GpenModel& model, const Tensor& points);

/// Canonical plane from a raw 4-vector.
Plane plane_from_raw(std::span<const double> raw);

/// Deterministic k-point sample of a cloud (without replacement when the
/// cloud is large enough, otherwise cycling through a shuffled order).
Mat sample_points(const PointCloud& cloud, std::size_t k, std::uint64_t seed);

Plane predict_plane(const GpenModel& model, const PointCloud& cloud, std::size_t k, std::uint64_t seed);

struct GpenSample {
  Mat points;  // k x 3
  PlaneParams label;
};

struct GpenTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  std::size_t points_per_frame = 521;
  AdamConfig adam{};  // decay_every counts epochs here
  LossWeights weights{};
  std::uint64_t shuffle_seed = 0;
};

struct HistoryEntry {
  int epoch = 0;
  long step = 0;   // optimizer steps completed at the end of the epoch
  double loss = 0; // mean per-frame training loss over the epoch, frame order
  double lr = 0;
};

struct GpenTrainResult {
  GpenModel model;
  std::vector<HistoryEntry> history;
  double initial_loss = 0.0;  // dataset loss before the first update
};

/// Mini-batch Adam on the gpen loss. Deterministic given the model's seeds
/// and cfg.shuffle_seed. Throws NumericalError with the step index when the
/// loss stops being finite.
GpenTrainResult train_gpen(const GpenModel& model, std::span<const GpenSample> data, const GpenTrainConfig& cfg);

/// Mean loss over a dataset without updating anything.
double dataset_loss(const GpenModel& model, std::span<const GpenSample> data, const LossWeights& w = {});

nlohmann::json mlp_to_json(const Mlp& mlp);
Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json gpen_to_json(const GpenModel& model);
GpenModel gpen_from_json(const nlohmann::json& j);

void save_gpen(const GpenModel& model, const std::string& path);
GpenModel load_gpen(const std::string& path);

/// CSV with columns step,loss,lr (one row per epoch).
std::string history_csv(std::span<const HistoryEntry> history);

}  // namespace pcfuse::nn
