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

#include <cstddef>
#include <span>
#include <vector>

namespace pcfuse {

/// Dense H x W x C grid, row-major with channels innermost.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  FeatureGrid(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  [[nodiscard]] std::size_t height() const { return h_; }
  [[nodiscard]] std::size_t width() const { return w_; }
  [[nodiscard]] std::size_t channels() const { return c_; }
  [[nodiscard]] std::size_t index(std::size_t r, std::size_t col, std::size_t ch) const { return (r * w_ + col) * c_ + ch; }
  [[nodiscard]] double at(std::size_t r, std::size_t col, std::size_t ch) const { return data_[index(r, col, ch)]; }
  [[nodiscard]] double& at(std::size_t r, std::size_t col, std::size_t ch) { return data_[index(r, col, ch)]; }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] std::span<double> data() { return data_; }
  [[nodiscard]] std::vector<double>& storage() { return data_; }

  bool operator==(const FeatureGrid&) const = default;

 private:
  std::size_t h_ = 0, w_ = 0, c_ = 0;
  std::vector<double> data_;
};

/// Dense X x Y x Z x C volume, row-major with channels innermost.
class FeatureVolume {
 public:
  FeatureVolume() = default;
  FeatureVolume(std::size_t x, std::size_t y, std::size_t z, std::size_t channels, double fill = 0.0);

  [[nodiscard]] std::size_t size_x() const { return x_; }
  [[nodiscard]] std::size_t size_y() const { return y_; }
  [[nodiscard]] std::size_t size_z() const { return z_; }
  [[nodiscard]] std::size_t channels() const { return c_; }
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k, std::size_t ch) const {
    return ((i * y_ + j) * z_ + k) * c_ + ch;
  }
  [[nodiscard]] double at(std::size_t i, std::size_t j, std::size_t k, std::size_t ch) const {
    return data_[index(i, j, k, ch)];
  }
  [[nodiscard]] double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t ch) {
    return data_[index(i, j, k, ch)];
  }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] std::span<double> data() { return data_; }

  bool operator==(const FeatureVolume&) const = default;

 private:
  std::size_t x_ = 0, y_ = 0, z_ = 0, c_ = 0;
  std::vector<double> data_;
};

}  // namespace pcfuse
