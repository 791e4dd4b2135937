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

#include "pcfuse/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pcfuse/errors.hpp"

namespace pcfuse::nn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive");
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) throw std::invalid_argument("tensor data length does not match shape");
  require_finite("tensor");
}

Tensor Tensor::from_matrix(const Mat& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(data));
}

Mat Tensor::as_matrix() const {
  const auto cols = static_cast<Eigen::Index>(shape_.back());
  const auto rows = static_cast<Eigen::Index>(data_.size()) / cols;
  return Eigen::Map<const Mat>(data_.data(), rows, cols);
}

void Tensor::require_finite(const char* what) const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + " contains NaN or Inf");
  }
}

}  // namespace pcfuse::nn
