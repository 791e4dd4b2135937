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

#include <vector>

#include "pcfuse/nn/autodiff.hpp"

namespace pcfuse::nn {

/// Adam with a step-wise learning-rate decay: lr * decay_rate^floor(t / decay_every),
/// where t counts whatever unit the caller advances with set_schedule_position()
/// (epochs for GPEN training).
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int decay_every = 10;
  double decay_rate = 0.7;

  void validate() const;
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig cfg);

  /// Applies one update from the accumulated gradients.
  void step();
  void zero_grad();
  void set_schedule_position(int t) { schedule_pos_ = t; }
  [[nodiscard]] double current_lr() const;
  [[nodiscard]] long steps() const { return t_; }

 private:
  std::vector<Var> params_;
  AdamConfig cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long t_ = 0;
  int schedule_pos_ = 0;
};

}  // namespace pcfuse::nn
