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

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// Every op allocates a node holding its value and a closure that pushes the
// node's gradient into its parents. backward() runs a topological sort from
// the scalar root. Parameters are long-lived leaf nodes whose gradients
// accumulate across backward() calls until zero_grad().

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pcfuse/nn/tensor.hpp"

namespace pcfuse::nn {

struct Node {
  Mat value;
  Mat grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  void accumulate(const Mat& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  [[nodiscard]] const Mat& value() const { return node_->value; }
  [[nodiscard]] Mat& mutable_value() { return node_->value; }
  [[nodiscard]] const Mat& grad() const { return node_->grad; }
  [[nodiscard]] Eigen::Index rows() const { return node_->value.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return node_->value.cols(); }
  [[nodiscard]] double scalar() const { return node_->value(0, 0); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

  void zero_grad();

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Mat value);
Var parameter(Mat value);

/// Accumulates d(root)/d(node) into every reachable node with requires_grad.
/// `root` must be 1x1.
void backward(const Var& root);

/// Records which branch every non-differentiable op takes (ReLU sign, max
/// argmax, smooth L1 regime). Finite-difference checks compare the traces of
/// the two perturbed evaluations and skip coordinates where they differ.
struct KinkMonitor {
  bool enabled = false;
  std::vector<std::int64_t> trace;
};
KinkMonitor& kink_monitor();

// Elementwise / structural ops.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, double k);
/// a * s where s is 1x1.
Var scale(const Var& a, const Var& s);
/// Adds a 1 x cols row vector to every row of a.
Var add_row(const Var& a, const Var& row);
Var matmul(const Var& a, const Var& b);
Var relu(const Var& a);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
/// Columns [start, start + count).
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
/// Rows a[indices[i]] stacked in order (indices may repeat).
Var select_rows(const Var& a, std::span<const Eigen::Index> indices);
Var sum_all(const Var& a);
Var mean_all(const Var& a);

/// Per-column max over the first `valid_rows` rows (all rows when negative),
/// returning 1 x cols. Zero rows selected returns a zero row.
Var max_rows(const Var& a, Eigen::Index valid_rows = -1);

/// Row-wise softmax.
Var softmax_rows(const Var& a);

/// Treats a as 1 x 4 (a, b, c, d) and L2-normalises the first three.
Var normalize_plane_head(const Var& a);

/// Mean of 0.5 e^2 (|e| < 1) or |e| - 0.5 over all elements, e = pred - target.
Var smooth_l1(const Var& pred, const Mat& target);

/// Mean over rows of -log softmax(logits)[label]. Labels are in [0, cols).
Var cross_entropy(const Var& logits, std::span<const int> labels);

/// Parameter-free linear operator given as a forward map and its adjoint on
/// flat row-major buffers.
struct LinearMap {
  Eigen::Index in_rows = 0, in_cols = 0;
  Eigen::Index out_rows = 0, out_cols = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
  std::function<void(std::span<const double>, std::span<double>)> apply_adjoint;
};
Var linear_map(const Var& a, std::shared_ptr<const LinearMap> map);

}  // namespace pcfuse::nn
