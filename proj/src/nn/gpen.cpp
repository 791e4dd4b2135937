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

#include "pcfuse/nn/gpen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pcfuse/errors.hpp"

namespace pcfuse::nn {

namespace {

void require_finite_params(const std::vector<Var>& params) {
  for (const auto& p : params) {
    if (!p.value().allFinite()) throw NumericalError("model weights contain NaN or Inf");
  }
}

}  // namespace

GpenModel GpenModel::create(const GpenSpec& spec) {
  if (spec.head.layer_widths.empty() || spec.head.layer_widths.back() != 4) {
    throw std::invalid_argument("GPEN head must end in 4 outputs");
  }
  GpenModel m;
  m.point_encoder = Mlp(3, spec.point_encoder);
  m.head = Mlp(m.point_encoder.output_width(), spec.head);
  m.input_scale = spec.input_scale;
  return m;
}

std::vector<Var> GpenModel::parameters() const {
  auto p = point_encoder.parameters();
  const auto h = head.parameters();
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

GpenModel GpenModel::clone() const { return GpenModel{point_encoder.clone(), head.clone(), input_scale}; }

GpenGraph gpen_forward_graph(const GpenModel& model, const Mat& points) {
  if (points.rows() < 1 || points.cols() != 3) throw std::invalid_argument("GPEN input must be k x 3 with k >= 1");
  const Var x = constant(points * model.input_scale);
  const Var features = model.point_encoder.forward(x);
  const Var global = max_rows(features);
  const Var raw = model.head.forward(global);
  return GpenGraph{normalize_plane_head(raw), features};
}

GpenOutput gpen_forward(const GpenModel& model, const Tensor& points) {
  if (points.rank() != 2 || points.shape()[1] != 3) throw std::invalid_argument("GPEN input must be [k, 3]");
  points.require_finite("GPEN input");
  require_finite_params(model.parameters());
  const GpenGraph g = gpen_forward_graph(model, points.as_matrix());
  GpenOutput out;
  out.plane_raw = Tensor({4}, std::vector<double>(g.plane.value().data(), g.plane.value().data() + 4));
  out.point_features = Tensor::from_matrix(g.point_features.value());
  return out;
}

Plane plane_from_raw(std::span<const double> raw) {
  if (raw.size() != 4) throw std::invalid_argument("plane needs 4 parameters");
  return Plane::from_coefficients(raw[0], raw[1], raw[2], raw[3]);
}

Mat sample_points(const PointCloud& cloud, std::size_t k, std::uint64_t seed) {
  if (cloud.empty()) throw std::invalid_argument("cannot sample from an empty cloud");
  if (k == 0) throw std::invalid_argument("sample size must be positive");
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Mat out(static_cast<Eigen::Index>(k), 3);
  for (std::size_t i = 0; i < k; ++i) out.row(static_cast<Eigen::Index>(i)) = cloud[order[i % order.size()]].transpose();
  return out;
}

Plane predict_plane(const GpenModel& model, const PointCloud& cloud, std::size_t k, std::uint64_t seed) {
  const GpenGraph g = gpen_forward_graph(model, sample_points(cloud, k, seed));
  const auto& v = g.plane.value();
  return Plane::from_coefficients(v(0), v(1), v(2), v(3));
}

double dataset_loss(const GpenModel& model, std::span<const GpenSample> data, const LossWeights& w) {
  if (data.empty()) throw std::invalid_argument("dataset is empty");
  double sum = 0.0;
  for (const auto& s : data) sum += gpen_loss(gpen_forward_graph(model, s.points).plane, s.label, w).scalar();
  return sum / static_cast<double>(data.size());
}

GpenTrainResult train_gpen(const GpenModel& initial, std::span<const GpenSample> data, const GpenTrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw std::invalid_argument("bad epoch or batch count");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].points.allFinite()) throw NumericalError("training frame " + std::to_string(i) + " has NaN or Inf points");
  }
  GpenTrainResult result;
  result.model = initial.clone();
  const auto params = result.model.parameters();
  require_finite_params(params);
  Adam opt(params, cfg.adam);
  std::mt19937_64 rng(cfg.shuffle_seed);
  result.initial_loss = dataset_loss(result.model, data, cfg.weights);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> frame_loss(data.size(), 0.0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_schedule_position(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      opt.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data[order[i]];
        Var loss;
        try {
          loss = gpen_loss(gpen_forward_graph(result.model, s.points).plane, s.label, cfg.weights);
        } catch (const NumericalError& e) {
          throw NumericalError("GPEN training diverged at step " + std::to_string(opt.steps() + 1) + ": " + e.what());
        }
        if (!std::isfinite(loss.scalar())) {
          throw NumericalError("GPEN training diverged at step " + std::to_string(opt.steps() + 1));
        }
        frame_loss[order[i]] = loss.scalar();
        backward(mul(loss, inv));
      }
      opt.step();
    }
    double sum = 0.0;
    for (double l : frame_loss) sum += l;
    result.history.push_back(HistoryEntry{epoch + 1, opt.steps(), sum / static_cast<double>(data.size()),
                                          opt.current_lr()});
  }
  return result;
}

nlohmann::json mlp_to_json(const Mlp& mlp) {
  nlohmann::json j;
  j["input_width"] = mlp.input_width();
  j["widths"] = mlp.spec().layer_widths;
  j["activation"] = mlp.spec().activation == Activation::ReLU ? "relu" : "none";
  j["activate_output"] = mlp.spec().activate_output;
  j["seed"] = mlp.spec().rng_seed;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : mlp.layers()) {
    const auto& w = l.weight.value();
    const auto& b = l.bias.value();
    layers.push_back({{"weight", std::vector<double>(w.data(), w.data() + w.size())},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  j["layers"] = std::move(layers);
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_widths = j.at("widths").get<std::vector<std::size_t>>();
  spec.activation = j.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::None;
  spec.activate_output = j.at("activate_output").get<bool>();
  spec.rng_seed = j.at("seed").get<std::uint64_t>();
  Mlp mlp(j.at("input_width").get<std::size_t>(), spec);
  const auto& layers = j.at("layers");
  if (layers.size() != mlp.layers().size()) throw DataError("checkpoint layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto w = layers[i].at("weight").get<std::vector<double>>();
    const auto b = layers[i].at("bias").get<std::vector<double>>();
    auto& l = mlp.layers()[i];
    if (w.size() != static_cast<std::size_t>(l.weight.value().size()) ||
        b.size() != static_cast<std::size_t>(l.bias.value().size())) {
      throw DataError("checkpoint weight shape mismatch");
    }
    std::copy(w.begin(), w.end(), l.weight.mutable_value().data());
    std::copy(b.begin(), b.end(), l.bias.mutable_value().data());
  }
  return mlp;
}

nlohmann::json gpen_to_json(const GpenModel& model) {
  return {{"format", "pcfuse-gpen"},
          {"version", 1},
          {"input_scale", model.input_scale},
          {"point_encoder", mlp_to_json(model.point_encoder)},
          {"head", mlp_to_json(model.head)}};
}

GpenModel gpen_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "pcfuse-gpen") throw DataError("not a GPEN checkpoint");
  GpenModel m;
  m.point_encoder = mlp_from_json(j.at("point_encoder"));
  m.head = mlp_from_json(j.at("head"));
  m.input_scale = j.at("input_scale").get<double>();
  return m;
}

void save_gpen(const GpenModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << gpen_to_json(model).dump(1) << '\n';
}

GpenModel load_gpen(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint " + path);
  try {
    return gpen_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path + ": " + e.what());
  }
}

std::string history_csv(std::span<const HistoryEntry> history) {
  std::ostringstream out;
  out << "step,loss,lr\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", h.step, h.loss, h.lr);
    out << buf;
  }
  return out.str();
}

}  // namespace pcfuse::nn
