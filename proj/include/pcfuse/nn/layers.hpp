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

#include <cstdint>
#include <vector>

#include "pcfuse/nn/autodiff.hpp"

namespace pcfuse::nn {

enum class Activation { ReLU, None };

struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::ReLU;
  /// Apply the activation after the last layer too (point encoders do,
  /// regression heads do not).
  bool activate_output = false;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Fully-connected layer y = x W + b over rows of x.
struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  /// Uniform init in +-sqrt(6 / (fan_in + fan_out)); zero bias.
  static Linear init(std::size_t in, std::size_t out, std::uint64_t seed);

  [[nodiscard]] Var forward(const Var& x) const;
};

/// Stack of Linear layers sharing one spec. Applied row-wise, so a k x in
/// input is a shared per-point MLP.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_width, MlpSpec spec);

  [[nodiscard]] Var forward(const Var& x) const;
  [[nodiscard]] std::vector<Var> parameters() const;
  [[nodiscard]] const MlpSpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t input_width() const { return input_width_; }
  [[nodiscard]] std::size_t output_width() const { return spec_.layer_widths.back(); }
  [[nodiscard]] std::vector<Linear>& layers() { return layers_; }
  [[nodiscard]] const std::vector<Linear>& layers() const { return layers_; }

  /// Deep copy (fresh parameter nodes with the same values).
  [[nodiscard]] Mlp clone() const;

 private:
  std::size_t input_width_ = 0;
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

/// Flattens all parameter values into one vector (layer order, W then b).
std::vector<double> flatten_parameters(std::span<const Var> params);
/// Inverse of flatten_parameters; sizes must match.
void assign_parameters(std::span<const Var> params, std::span<const double> values);

}  // namespace pcfuse::nn
