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

#include "pcfuse/nn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace pcfuse::nn {

double smooth_l1(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw std::invalid_argument("smooth_l1: shape mismatch");
  return smooth_l1(constant(pred.as_matrix()), target.as_matrix()).scalar();
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw std::invalid_argument("cross_entropy: logits must be n x classes");
  return cross_entropy(constant(logits.as_matrix()), labels).scalar();
}

namespace {

void require_unit_label(const PlaneParams& label) {
  if (std::abs(label.normal.norm() - 1.0) > 1e-6) throw std::invalid_argument("label normal must be unit length");
}

}  // namespace

double gpen_loss(const PlaneParams& pred, const PlaneParams& label, const LossWeights& w) {
  Mat p(1, 4);
  p << pred.normal.x(), pred.normal.y(), pred.normal.z(), pred.offset;
  return gpen_loss(constant(std::move(p)), label, w).scalar();
}

Var gpen_loss(const Var& plane, const PlaneParams& label, const LossWeights& w) {
  require_unit_label(label);
  if (plane.value().size() != 4) throw std::invalid_argument("gpen_loss: plane must have 4 entries");
  Mat vec_target(1, 3);
  vec_target << label.normal.x(), label.normal.y(), label.normal.z();
  Mat d_target(1, 1);
  d_target(0, 0) = label.offset;
  const Var flat = reshape(plane, 1, 4);
  const Var vec_term = smooth_l1(slice_cols(flat, 0, 3), vec_target);
  const Var d_term = smooth_l1(slice_cols(flat, 3, 1), d_target);
  return add(mul(vec_term, w.alpha_v), mul(d_term, w.alpha_d));
}

Var rpn_loss(const Var& cls_logits, std::span<const int> labels, const Var& reg_pred, const Mat& reg_target,
             const LossWeights& w) {
  Var loss = mul(cross_entropy(cls_logits, labels), w.beta_c);
  if (reg_pred.rows() > 0 && reg_target.rows() > 0) loss = add(loss, mul(smooth_l1(reg_pred, reg_target), w.beta_r));
  return loss;
}

Var refinement_loss(const Var& cls_logits, std::span<const int> labels, const Var& corner_pred,
                    const Mat& corner_target, const Var& angle_pred, const Mat& angle_target,
                    const LossWeights& w) {
  Var loss = mul(cross_entropy(cls_logits, labels), w.gamma_c);
  if (corner_target.rows() > 0) {
    loss = add(loss, mul(smooth_l1(corner_pred, corner_target), w.gamma_r));
    loss = add(loss, mul(smooth_l1(angle_pred, angle_target), w.gamma_a));
  }
  return loss;
}

double total_loss(double rpn, double refinement, double gpen) { return rpn + refinement + gpen; }

PlaneParams to_params(const Plane& p) { return PlaneParams{p.normal(), p.offset()}; }

}  // namespace pcfuse::nn
