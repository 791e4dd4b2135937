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

#include "pcfuse/nn/layers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace pcfuse::nn {

void MlpSpec::validate() const {
  if (layer_widths.empty()) throw std::invalid_argument("MLP needs at least one layer");
  for (std::size_t w : layer_widths) {
    if (w == 0) throw std::invalid_argument("MLP layer widths must be positive");
  }
}

Linear Linear::init(std::size_t in, std::size_t out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Mat w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return Linear{parameter(std::move(w)), parameter(Mat::Zero(1, static_cast<Eigen::Index>(out)))};
}

Var Linear::forward(const Var& x) const { return add_row(matmul(x, weight), bias); }

Mlp::Mlp(std::size_t input_width, MlpSpec spec) : input_width_(input_width), spec_(std::move(spec)) {
  spec_.validate();
  if (input_width == 0) throw std::invalid_argument("MLP input width must be positive");
  std::size_t in = input_width;
  for (std::size_t i = 0; i < spec_.layer_widths.size(); ++i) {
    // Distinct, reproducible stream per layer.
    layers_.push_back(Linear::init(in, spec_.layer_widths[i], spec_.rng_seed * 1000003ULL + i));
    in = spec_.layer_widths[i];
  }
}

Var Mlp::forward(const Var& x) const {
  if (x.cols() != static_cast<Eigen::Index>(input_width_)) throw std::invalid_argument("MLP input width mismatch");
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    const bool last = i + 1 == layers_.size();
    if (spec_.activation == Activation::ReLU && (!last || spec_.activate_output)) h = relu(h);
  }
  return h;
}

std::vector<Var> Mlp::parameters() const {
  std::vector<Var> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

Mlp Mlp::clone() const {
  Mlp copy;
  copy.input_width_ = input_width_;
  copy.spec_ = spec_;
  for (const auto& l : layers_) copy.layers_.push_back(Linear{parameter(l.weight.value()), parameter(l.bias.value())});
  return copy;
}

std::vector<double> flatten_parameters(std::span<const Var> params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.value().data(), p.value().data() + p.value().size());
  return out;
}

void assign_parameters(std::span<const Var> params, std::span<const double> values) {
  std::size_t at = 0;
  for (const auto& p : params) {
    Var v = p;
    const auto n = static_cast<std::size_t>(v.value().size());
    if (at + n > values.size()) throw std::invalid_argument("parameter vector too short");
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(at), values.begin() + static_cast<std::ptrdiff_t>(at + n),
              v.mutable_value().data());
    at += n;
  }
  if (at != values.size()) throw std::invalid_argument("parameter vector too long");
}

}  // namespace pcfuse::nn
