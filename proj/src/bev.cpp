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

#include "pcfuse/bev.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcfuse {

namespace {

std::size_t cell_count(double lo, double hi, double cell) {
  return static_cast<std::size_t>(std::ceil((hi - lo) / cell - 1e-9));
}

}  // namespace

void BevConfig::validate() const {
  if (!(cell > 0.0)) throw std::invalid_argument("BEV cell size must be positive");
  if (!(x_max > x_min) || !(z_max > z_min)) throw std::invalid_argument("BEV ranges must be nonempty");
  if (!(band_hi > band_lo)) throw std::invalid_argument("BEV height band must be nonempty");
  if (n_slices < 1) throw std::invalid_argument("BEV needs at least one height slice");
  if (!(density_log_base > 1.0)) throw std::invalid_argument("density log base must exceed 1");
}

std::size_t BevConfig::rows() const { return cell_count(x_min, x_max, cell); }
std::size_t BevConfig::cols() const { return cell_count(z_min, z_max, cell); }

std::optional<std::pair<std::size_t, std::size_t>> world_to_bev(const BevConfig& cfg, double x, double z) {
  if (x < cfg.x_min || x >= cfg.x_max || z < cfg.z_min || z >= cfg.z_max) return std::nullopt;
  const double r = std::floor((x - cfg.x_min) / cfg.cell);
  const double c = std::floor((z - cfg.z_min) / cfg.cell);
  if (r < 0.0 || c < 0.0) return std::nullopt;
  const auto ri = static_cast<std::size_t>(r);
  const auto ci = static_cast<std::size_t>(c);
  if (ri >= cfg.rows() || ci >= cfg.cols()) return std::nullopt;
  return std::make_pair(ri, ci);
}

BevMaps rasterize(const PointCloud& cloud, const Plane& plane, const BevConfig& cfg) {
  cfg.validate();
  const std::size_t rows = cfg.rows();
  const std::size_t cols = cfg.cols();
  const auto slices = static_cast<std::size_t>(cfg.n_slices);
  const double slice_h = cfg.slice_height();

  std::vector<std::uint32_t> counts(rows * cols, 0);
  BevMaps maps{FeatureGrid(rows, cols, 1), FeatureGrid(rows, cols, slices)};
  for (const auto& p : cloud.points()) {
    const double h = signed_distance(plane, p);
    if (h < cfg.band_lo || h >= cfg.band_hi) continue;
    const auto cell = world_to_bev(cfg, p.x(), p.z());
    if (!cell) continue;
    const auto [r, c] = *cell;
    const double rel = h - cfg.band_lo;
    const auto s = std::min(slices - 1, static_cast<std::size_t>(std::floor(rel / slice_h)));
    const double value = cfg.absolute_heights ? rel : rel - static_cast<double>(s) * slice_h;
    double& slot = maps.heights.at(r, c, s);
    slot = std::max(slot, value);
    ++counts[r * cols + c];
  }
  const double norm = std::log(cfg.density_log_base);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    maps.density.data()[i] = std::min(1.0, std::log(static_cast<double>(counts[i]) + 1.0) / norm);
  }
  return maps;
}

std::pair<double, double> bev_to_world(const BevConfig& cfg, std::size_t row, std::size_t col) {
  if (row >= cfg.rows() || col >= cfg.cols()) throw std::out_of_range("BEV cell index out of range");
  return {cfg.x_min + (static_cast<double>(row) + 0.5) * cfg.cell, cfg.z_min + (static_cast<double>(col) + 0.5) * cfg.cell};
}

}  // namespace pcfuse
