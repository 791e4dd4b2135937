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

#include <span>

#include "pcfuse/geometry.hpp"
#include "pcfuse/nn/autodiff.hpp"
#include "pcfuse/nn/tensor.hpp"

namespace pcfuse::nn {

/// Loss balancing constants. The defaults are fixed values and are
/// asserted verbatim by the config-defaults test.
struct LossWeights {
  double alpha_v = 5.0;   // plane normal
  double alpha_d = 50.0;  // plane offset
  double beta_c = 1.0;    // RPN classification
  double beta_r = 1.0;    // RPN regression
  double gamma_c = 1.0;   // refinement classification
  double gamma_r = 5.0;   // refinement corners
  double gamma_a = 1.0;   // refinement angle
};

/// Mean smooth L1 over elements. Throws on shape mismatch.
double smooth_l1(const Tensor& pred, const Tensor& target);

/// Mean negative log-likelihood; logits is n x classes, labels has n entries.
double cross_entropy(const Tensor& logits, std::span<const int> labels);

struct PlaneParams {
  Eigen::Vector3d normal;
  double offset = 0.0;
};

/// alpha_v * smooth_l1(vec, vec*) + alpha_d * smooth_l1(d, d*).
/// Throws std::invalid_argument when the label normal is not unit length.
double gpen_loss(const PlaneParams& pred, const PlaneParams& label, const LossWeights& w = {});
/// Differentiable form; `plane` is the 1x4 normalised head output.
Var gpen_loss(const Var& plane, const PlaneParams& label, const LossWeights& w = {});

/// beta_c * CE(cls) + beta_r * smooth_l1(reg) over positives (regression term
/// is dropped when there are no positives).
Var rpn_loss(const Var& cls_logits, std::span<const int> labels, const Var& reg_pred, const Mat& reg_target,
             const LossWeights& w = {});

/// gamma_c * CE + gamma_r * smooth_l1(corners) + gamma_a * smooth_l1(angle);
/// corner and angle terms cover positive proposals only.
Var refinement_loss(const Var& cls_logits, std::span<const int> labels, const Var& corner_pred,
                    const Mat& corner_target, const Var& angle_pred, const Mat& angle_target,
                    const LossWeights& w = {});

/// Sum of the three stage losses; their internal weights are already applied.
double total_loss(double rpn, double refinement, double gpen);

PlaneParams to_params(const Plane& p);

}  // namespace pcfuse::nn
