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

#include "pcfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <tuple>

#include "pcfuse/errors.hpp"

namespace pcfuse {

using nn::LinearMap;
using nn::Mat;
using nn::Var;

namespace {

using Span = std::span<const double>;
using OutSpan = std::span<double>;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 ? r : v;
}

struct Tap {
  std::size_t out, in;  // flattened (x, z) cell indices
  double w;
};

// Bilinear taps for one (x, z) slab of an n x n grid.
std::vector<Tap> rotation_taps(std::size_t n, double angle) {
  std::vector<Tap> taps;
  const double c0 = 0.5 * static_cast<double>(n - 1);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  const auto ni = static_cast<long>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double dx = static_cast<double>(i) - c0;
      const double dz = static_cast<double>(k) - c0;
      const double sx = snap(c0 + dx * ca - dz * sa);
      const double sz = snap(c0 + dx * sa + dz * ca);
      const double fx = std::floor(sx);
      const double fz = std::floor(sz);
      const double tx = sx - fx;
      const double tz = sz - fz;
      const auto ix = static_cast<long>(fx);
      const auto iz = static_cast<long>(fz);
      const std::array<std::tuple<long, long, double>, 4> nb{{{ix, iz, (1 - tx) * (1 - tz)},
                                                              {ix + 1, iz, tx * (1 - tz)},
                                                              {ix, iz + 1, (1 - tx) * tz},
                                                              {ix + 1, iz + 1, tx * tz}}};
      for (const auto& [a, b, w] : nb) {
        if (w == 0.0 || a < 0 || b < 0 || a >= ni || b >= ni) continue;
        taps.push_back(Tap{i * n + k, static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b), w});
      }
    }
  }
  return taps;
}

void rotate_apply(const std::vector<Tap>& taps, std::size_t n, std::size_t ny, std::size_t c, Span in, OutSpan out,
                  bool adjoint) {
  std::fill(out.begin(), out.end(), 0.0);
  // Flat layout ((x * Y + y) * Z + z) * C + ch with X = Z = n.
  auto flat = [&](std::size_t cell, std::size_t y) {
    const std::size_t x = cell / n;
    const std::size_t z = cell % n;
    return ((x * ny + y) * n + z) * c;
  };
  for (const auto& t : taps) {
    for (std::size_t y = 0; y < ny; ++y) {
      const std::size_t o = flat(t.out, y);
      const std::size_t i = flat(t.in, y);
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (adjoint) {
          out[i + ch] += t.w * in[o + ch];
        } else {
          out[o + ch] += t.w * in[i + ch];
        }
      }
    }
  }
}

// Tiling: out volume [X, Y, Z, C] from a grid; `src` gives the grid cell for
// a volume cell.
template <typename Src>
void tile_apply(std::size_t x, std::size_t y, std::size_t z, std::size_t c, Src src, Span in, OutSpan out,
                bool adjoint) {
  if (adjoint) std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < x; ++i) {
    for (std::size_t j = 0; j < y; ++j) {
      for (std::size_t k = 0; k < z; ++k) {
        const std::size_t v = ((i * y + j) * z + k) * c;
        const std::size_t g = src(i, j, k) * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          if (adjoint) {
            out[g + ch] += in[v + ch];
          } else {
            out[v + ch] = in[g + ch];
          }
        }
      }
    }
  }
}

void pool_apply(std::size_t x, std::size_t y, std::size_t z, std::size_t c, int axis, Span in, OutSpan out,
                bool adjoint) {
  const std::size_t ext[3] = {x, y, z};
  const auto n = static_cast<double>(ext[axis]);
  auto dst = [&](std::size_t i, std::size_t j, std::size_t k) {
    switch (axis) {
      case 0: return (j * z + k) * c;
      case 1: return (i * z + k) * c;
      default: return (i * y + j) * c;
    }
  };
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < x; ++i) {
    for (std::size_t j = 0; j < y; ++j) {
      for (std::size_t k = 0; k < z; ++k) {
        const std::size_t v = ((i * y + j) * z + k) * c;
        const std::size_t g = dst(i, j, k);
        for (std::size_t ch = 0; ch < c; ++ch) {
          if (adjoint) {
            out[v + ch] = in[g + ch] / n;
          } else {
            out[g + ch] += in[v + ch];
          }
        }
      }
    }
  }
  if (!adjoint) {
    for (double& o : out) o /= n;
  }
}

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

RoiRects roi_project(const Box3D& box, const CameraModel& cam, const BevConfig& bev) {
  cam.validate();
  double u0 = std::numeric_limits<double>::infinity(), v0 = u0;
  double u1 = -u0, v1 = -u0;
  bool any = false;
  for (const auto& p : box_corners(box)) {
    const auto px = project_point(cam, p);
    if (!px) continue;
    any = true;
    u0 = std::min(u0, px->u);
    u1 = std::max(u1, px->u);
    v0 = std::min(v0, px->v);
    v1 = std::max(v1, px->v);
  }
  if (!any) throw DegenerateGeometry("box is entirely behind the camera");
  const double w = cam.image_width;
  const double h = cam.image_height;
  RoiRects r;
  r.image = GridRect{std::clamp(v0, 0.0, h), std::clamp(u0, 0.0, w), std::clamp(v1, 0.0, h), std::clamp(u1, 0.0, w)};

  double x0 = std::numeric_limits<double>::infinity(), z0 = x0;
  double x1 = -x0, z1 = -x0;
  for (const auto& q : bev_footprint(box)) {
    x0 = std::min(x0, q.x());
    x1 = std::max(x1, q.x());
    z0 = std::min(z0, q.y());
    z1 = std::max(z1, q.y());
  }
  const double rows = static_cast<double>(bev.rows());
  const double cols = static_cast<double>(bev.cols());
  r.bev = GridRect{std::clamp((x0 - bev.x_min) / bev.cell, 0.0, rows), std::clamp((z0 - bev.z_min) / bev.cell, 0.0, cols),
                   std::clamp((x1 - bev.x_min) / bev.cell, 0.0, rows), std::clamp((z1 - bev.z_min) / bev.cell, 0.0, cols)};
  return r;
}

FeatureGrid crop_resize(const FeatureGrid& grid, GridRect rect, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("crop output size must be positive");
  if (grid.height() == 0 || grid.width() == 0) throw std::invalid_argument("cannot crop an empty grid");
  const double gh = static_cast<double>(grid.height());
  const double gw = static_cast<double>(grid.width());
  rect.row0 = std::clamp(rect.row0, 0.0, gh);
  rect.row1 = std::clamp(rect.row1, 0.0, gh);
  rect.col0 = std::clamp(rect.col0, 0.0, gw);
  rect.col1 = std::clamp(rect.col1, 0.0, gw);
  if (!(rect.rows() > 0.0) || !(rect.cols() > 0.0)) throw std::invalid_argument("crop rect is empty");

  FeatureGrid out(out_h, out_w, grid.channels());
  const std::size_t c = grid.channels();
  for (std::size_t i = 0; i < out_h; ++i) {
    double r = rect.row0 + (static_cast<double>(i) + 0.5) * rect.rows() / static_cast<double>(out_h) - 0.5;
    r = std::clamp(r, 0.0, gh - 1.0);
    const auto r0 = static_cast<std::size_t>(std::floor(r));
    const std::size_t r1 = std::min(r0 + 1, grid.height() - 1);
    const double tr = r - static_cast<double>(r0);
    for (std::size_t j = 0; j < out_w; ++j) {
      double q = rect.col0 + (static_cast<double>(j) + 0.5) * rect.cols() / static_cast<double>(out_w) - 0.5;
      q = std::clamp(q, 0.0, gw - 1.0);
      const auto q0 = static_cast<std::size_t>(std::floor(q));
      const std::size_t q1 = std::min(q0 + 1, grid.width() - 1);
      const double tq = q - static_cast<double>(q0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v = (1 - tr) * (1 - tq) * grid.at(r0, q0, ch);
        if (tq > 0.0) v += (1 - tr) * tq * grid.at(r0, q1, ch);
        if (tr > 0.0) v += tr * (1 - tq) * grid.at(r1, q0, ch);
        if (tr > 0.0 && tq > 0.0) v += tr * tq * grid.at(r1, q1, ch);
        out.at(i, j, ch) = v;
      }
    }
  }
  return out;
}

PointFeatureSet point_pool(const Mat& features, const Box3D& box, const PointCloud& points, std::size_t m,
                           std::uint64_t seed) {
  if (static_cast<std::size_t>(features.rows()) != points.size()) {
    throw std::invalid_argument("point features must be row-aligned with the points");
  }
  if (m == 0) throw std::invalid_argument("point pool size must be positive");
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (contains(box, points[i])) inside.push_back(i);
  }
  auto key = [&](std::size_t i) {
    const auto& p = points[i];
    return std::make_tuple(p.x(), p.y(), p.z());
  };
  std::stable_sort(inside.begin(), inside.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  if (inside.size() > m) {
    std::mt19937_64 rng(seed);
    std::shuffle(inside.begin(), inside.end(), rng);
    inside.resize(m);
    std::stable_sort(inside.begin(), inside.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  }
  PointFeatureSet s;
  s.features = Mat::Zero(idx(m), features.cols());
  s.valid_count = inside.size();
  for (std::size_t r = 0; r < inside.size(); ++r) s.features.row(idx(r)) = features.row(idx(inside[r]));
  return s;
}

std::vector<double> max_pool_points(const PointFeatureSet& s, bool literal) {
  const Eigen::Index rows = literal ? s.features.rows() : idx(s.valid_count);
  std::vector<double> out(static_cast<std::size_t>(s.features.cols()), 0.0);
  if (rows == 0) return out;
  for (Eigen::Index c = 0; c < s.features.cols(); ++c) out[static_cast<std::size_t>(c)] = s.features.col(c).head(rows).maxCoeff();
  return out;
}

double azimuth(const Box3D& box) {
  if (box.center.x() == 0.0 && box.center.z() == 0.0) throw std::invalid_argument("azimuth undefined at the origin");
  return std::atan2(box.center.x(), box.center.z());
}

std::shared_ptr<const LinearMap> tile_image_map(std::size_t s, std::size_t c, std::size_t depth) {
  if (s == 0 || c == 0 || depth == 0) throw std::invalid_argument("tile extents must be positive");
  auto m = std::make_shared<LinearMap>();
  m->in_rows = idx(s * s);
  m->in_cols = idx(c);
  m->out_rows = idx(s * s * depth);
  m->out_cols = idx(c);
  // volume [x = u, y = v, z] <- grid [row = v, col = u]
  auto src = [s](std::size_t i, std::size_t j, std::size_t) { return j * s + i; };
  m->apply = [=](Span in, OutSpan out) { tile_apply(s, s, depth, c, src, in, out, false); };
  m->apply_adjoint = [=](Span in, OutSpan out) { tile_apply(s, s, depth, c, src, in, out, true); };
  return m;
}

std::shared_ptr<const LinearMap> tile_bev_map(std::size_t s, std::size_t c, std::size_t height) {
  if (s == 0 || c == 0 || height == 0) throw std::invalid_argument("tile extents must be positive");
  auto m = std::make_shared<LinearMap>();
  m->in_rows = idx(s * s);
  m->in_cols = idx(c);
  m->out_rows = idx(s * height * s);
  m->out_cols = idx(c);
  // volume [x = row, y, z = col] <- grid [row, col]
  auto src = [s](std::size_t i, std::size_t, std::size_t k) { return i * s + k; };
  m->apply = [=](Span in, OutSpan out) { tile_apply(s, height, s, c, src, in, out, false); };
  m->apply_adjoint = [=](Span in, OutSpan out) { tile_apply(s, height, s, c, src, in, out, true); };
  return m;
}

std::shared_ptr<const LinearMap> rotate_y_map(std::size_t x, std::size_t y, std::size_t c, double angle) {
  if (x == 0 || y == 0 || c == 0) throw std::invalid_argument("volume extents must be positive");
  auto taps = std::make_shared<std::vector<Tap>>(rotation_taps(x, angle));
  auto m = std::make_shared<LinearMap>();
  m->in_rows = m->out_rows = idx(x * y * x);
  m->in_cols = m->out_cols = idx(c);
  m->apply = [=](Span in, OutSpan out) { rotate_apply(*taps, x, y, c, in, out, false); };
  m->apply_adjoint = [=](Span in, OutSpan out) { rotate_apply(*taps, x, y, c, in, out, true); };
  return m;
}

std::shared_ptr<const LinearMap> mean_pool_map(std::size_t x, std::size_t y, std::size_t z, std::size_t c, int axis) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("pool axis must be 0, 1 or 2");
  const std::size_t ext[3] = {x, y, z};
  auto m = std::make_shared<LinearMap>();
  m->in_rows = idx(x * y * z);
  m->in_cols = idx(c);
  m->out_rows = idx(x * y * z / ext[axis]);
  m->out_cols = idx(c);
  m->apply = [=](Span in, OutSpan out) { pool_apply(x, y, z, c, axis, in, out, false); };
  m->apply_adjoint = [=](Span in, OutSpan out) { pool_apply(x, y, z, c, axis, in, out, true); };
  return m;
}

namespace {

FeatureVolume run_volume(const LinearMap& m, std::span<const double> in, std::size_t x, std::size_t y, std::size_t z,
                         std::size_t c) {
  FeatureVolume out(x, y, z, c);
  m.apply(in, out.data());
  return out;
}

FeatureGrid run_grid(const LinearMap& m, std::span<const double> in, std::size_t h, std::size_t w, std::size_t c) {
  FeatureGrid out(h, w, c);
  m.apply(in, out.data());
  return out;
}

void require_square(const FeatureGrid& g, const char* what) {
  if (g.height() != g.width()) throw std::invalid_argument(std::string(what) + " must be S x S x C");
}

}  // namespace

FeatureVolume tile_image(const FeatureGrid& f_il, std::size_t depth) {
  require_square(f_il, "image crop");
  const std::size_t s = f_il.height();
  return run_volume(*tile_image_map(s, f_il.channels(), depth), f_il.data(), s, s, depth, f_il.channels());
}

FeatureVolume tile_bev(const FeatureGrid& f_bl, std::size_t height) {
  require_square(f_bl, "BEV crop");
  const std::size_t s = f_bl.height();
  return run_volume(*tile_bev_map(s, f_bl.channels(), height), f_bl.data(), s, height, s, f_bl.channels());
}

FeatureVolume rotate_volume_y(const FeatureVolume& v, double angle) {
  if (v.size_x() != v.size_z()) throw std::invalid_argument("rotate_volume_y needs equal x and z extents");
  return run_volume(*rotate_y_map(v.size_x(), v.size_y(), v.channels(), angle), v.data(), v.size_x(), v.size_y(),
                    v.size_z(), v.channels());
}

FeatureGrid mean_pool_x(const FeatureVolume& v) {
  return run_grid(*mean_pool_map(v.size_x(), v.size_y(), v.size_z(), v.channels(), 0), v.data(), v.size_y(), v.size_z(),
                  v.channels());
}

FeatureGrid mean_pool_y(const FeatureVolume& v) {
  return run_grid(*mean_pool_map(v.size_x(), v.size_y(), v.size_z(), v.channels(), 1), v.data(), v.size_x(), v.size_z(),
                  v.channels());
}

FeatureGrid mean_pool_z(const FeatureVolume& v) {
  return run_grid(*mean_pool_map(v.size_x(), v.size_y(), v.size_z(), v.channels(), 2), v.data(), v.size_x(), v.size_y(),
                  v.channels());
}

FeatureVolume operator+(const FeatureVolume& a, const FeatureVolume& b) {
  if (a.size_x() != b.size_x() || a.size_y() != b.size_y() || a.size_z() != b.size_z() || a.channels() != b.channels()) {
    throw std::invalid_argument("volume shapes differ");
  }
  FeatureVolume out = a;
  auto o = out.data();
  auto d = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += d[i];
  return out;
}

std::vector<double> spatial_fuse(const FeatureGrid& f_il, const FeatureGrid& f_bl, std::span<const double> f_pl,
                                 double az) {
  require_square(f_il, "image crop");
  if (f_il.height() != f_bl.height() || f_il.width() != f_bl.width() || f_il.channels() != f_bl.channels()) {
    throw std::invalid_argument("image and BEV crops differ in shape");
  }
  const std::size_t s = f_il.height();
  if (f_pl.size() != s * s * f_il.channels()) throw std::invalid_argument("f_pl length must be S*S*C");
  const FeatureVolume m3d = rotate_volume_y(tile_image(f_il, s), az) + tile_bev(f_bl, s);
  const FeatureGrid px = mean_pool_x(m3d);
  const FeatureGrid py = mean_pool_y(m3d);
  const FeatureGrid pz = mean_pool_z(m3d);
  std::vector<double> out(f_pl.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * ((px.data()[i] + py.data()[i] + pz.data()[i]) + f_pl[i]);
  return out;
}

Var spatial_fuse(const Var& f_il, const Var& f_bl, const Var& f_pl, std::size_t s, double az) {
  const auto c = static_cast<std::size_t>(f_il.cols());
  if (f_il.rows() != idx(s * s) || f_bl.rows() != f_il.rows() || f_bl.cols() != f_il.cols()) {
    throw std::invalid_argument("spatial_fuse: crops must be (S*S) x C");
  }
  if (f_pl.rows() != 1 || f_pl.cols() != idx(s * s * c)) throw std::invalid_argument("spatial_fuse: f_pl must be 1 x S*S*C");
  const Var i3d = nn::linear_map(nn::linear_map(f_il, tile_image_map(s, c, s)), rotate_y_map(s, s, c, az));
  const Var b3d = nn::linear_map(f_bl, tile_bev_map(s, c, s));
  const Var m3d = nn::add(i3d, b3d);
  Var ml = nn::linear_map(m3d, mean_pool_map(s, s, s, c, 0));
  ml = nn::add(ml, nn::linear_map(m3d, mean_pool_map(s, s, s, c, 1)));
  ml = nn::add(ml, nn::linear_map(m3d, mean_pool_map(s, s, s, c, 2)));
  return nn::mul(nn::add(nn::reshape(ml, 1, idx(s * s * c)), f_pl), 0.5);
}

AdaptiveWeighting::AdaptiveWeighting(std::size_t grid_size, std::size_t channels, nn::MlpSpec mlp, std::uint64_t seed)
    : s_(grid_size), c_(channels) {
  if (grid_size == 0 || channels == 0) throw std::invalid_argument("AW extents must be positive");
  if (channels % 4 != 0) throw std::invalid_argument("AW channel count must be divisible by 4");
  if (mlp.layer_widths.empty() || mlp.layer_widths.back() != 3) throw std::invalid_argument("AW MLP must end in 3 outputs");
  const std::size_t r = channels / 4;
  reduce_img_ = nn::Linear::init(channels, r, seed * 7919 + 1);
  reduce_bev_ = nn::Linear::init(channels, r, seed * 7919 + 2);
  reduce_pt_ = nn::Linear::init(channels, r, seed * 7919 + 3);
  mlp_ = nn::Mlp(grid_size * grid_size * r, std::move(mlp));
}

AwOutput AdaptiveWeighting::forward(const Var& f_il, const Var& f_bl, const Var& f_pl) const {
  const Eigen::Index rows = idx(s_ * s_);
  const Eigen::Index c = idx(c_);
  auto check = [&](const Var& v) {
    if (v.rows() != rows || v.cols() != c) throw std::invalid_argument("AW inputs must be (S*S) x C");
  };
  check(f_il);
  check(f_bl);
  check(f_pl);
  const Eigen::Index flat = rows * (c / 4);
  Var sum = nn::reshape(reduce_img_.forward(f_il), 1, flat);
  sum = nn::add(sum, nn::reshape(reduce_bev_.forward(f_bl), 1, flat));
  sum = nn::add(sum, nn::reshape(reduce_pt_.forward(f_pl), 1, flat));
  const Var w = nn::softmax_rows(mlp_.forward(sum));
  return AwOutput{nn::scale(f_il, nn::slice_cols(w, 0, 1)), nn::scale(f_bl, nn::slice_cols(w, 1, 1)),
                  nn::scale(f_pl, nn::slice_cols(w, 2, 1)), w};
}

std::vector<Var> AdaptiveWeighting::parameters() const {
  std::vector<Var> p{reduce_img_.weight, reduce_img_.bias, reduce_bev_.weight,
                     reduce_bev_.bias,   reduce_pt_.weight,  reduce_pt_.bias};
  const auto m = mlp_.parameters();
  p.insert(p.end(), m.begin(), m.end());
  return p;
}

AdaptiveWeighting AdaptiveWeighting::clone() const {
  AdaptiveWeighting a;
  a.s_ = s_;
  a.c_ = c_;
  auto copy = [](const nn::Linear& l) { return nn::Linear{nn::parameter(l.weight.value()), nn::parameter(l.bias.value())}; };
  a.reduce_img_ = copy(reduce_img_);
  a.reduce_bev_ = copy(reduce_bev_);
  a.reduce_pt_ = copy(reduce_pt_);
  a.mlp_ = mlp_.clone();
  return a;
}

void AdaptiveWeighting::zero_output_layer() {
  auto& last = mlp_.layers().back();
  last.weight.mutable_value().setZero();
  last.bias.mutable_value().setZero();
}

Mat grid_to_mat(const FeatureGrid& g) {
  Mat m(idx(g.height() * g.width()), idx(g.channels()));
  std::copy(g.data().begin(), g.data().end(), m.data());
  return m;
}

FeatureGrid mat_to_grid(const Mat& m, std::size_t h, std::size_t w) {
  if (static_cast<std::size_t>(m.rows()) != h * w) throw std::invalid_argument("matrix rows must equal h * w");
  return FeatureGrid(h, w, static_cast<std::size_t>(m.cols()), std::vector<double>(m.data(), m.data() + m.size()));
}

AwResult adaptive_weighting(const AdaptiveWeighting& aw, const FeatureGrid& f_il, const FeatureGrid& f_bl,
                            std::span<const double> f_pl) {
  const std::size_t s = aw.grid_size();
  const std::size_t c = aw.channels();
  if (f_pl.size() != s * s * c) throw std::invalid_argument("f_pl length must be S*S*C");
  Mat pl(idx(s * s), idx(c));
  std::copy(f_pl.begin(), f_pl.end(), pl.data());
  const AwOutput o = aw.forward(nn::constant(grid_to_mat(f_il)), nn::constant(grid_to_mat(f_bl)), nn::constant(pl));
  AwResult r;
  r.img = mat_to_grid(o.img.value(), s, s);
  r.bev = mat_to_grid(o.bev.value(), s, s);
  r.pt.assign(o.pt.value().data(), o.pt.value().data() + o.pt.value().size());
  const auto& w = o.weights.value();
  r.weights = AwWeights{w(0, 0), w(0, 1), w(0, 2)};
  return r;
}

}  // namespace pcfuse
