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

#include "pcfuse/feature_grid.hpp"

#include <cmath>
#include <stdexcept>

namespace pcfuse {

FeatureGrid::FeatureGrid(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : h_(height), w_(width), c_(channels), data_(height * width * channels, fill) {}

FeatureGrid::FeatureGrid(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
  if (data_.size() != h_ * w_ * c_) throw std::invalid_argument("feature grid data length does not match shape");
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature grid entries must be finite");
  }
}

FeatureVolume::FeatureVolume(std::size_t x, std::size_t y, std::size_t z, std::size_t channels, double fill)
    : x_(x), y_(y), z_(z), c_(channels), data_(x * y * z * channels, fill) {}

}  // namespace pcfuse
