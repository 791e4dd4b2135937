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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pcfuse/errors.hpp"
#include "pcfuse/fusion.hpp"
#include "pcfuse/nn/grad_check.hpp"

using namespace pcfuse;
using nn::Mat;
using nn::Var;

namespace {

FeatureGrid random_grid(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  FeatureGrid g(h, w, c);
  for (auto& v : g.data()) v = n(rng);
  return g;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

FeatureVolume random_volume(std::size_t s, std::size_t y, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  FeatureVolume v(s, y, s, c);
  for (auto& x : v.data()) x = n(rng);
  return v;
}

Box3D make_box(double x, double y, double z, double l, double w, double h, double yaw) {
  Box3D b;
  b.center = Point3(x, y, z);
  b.length = l;
  b.width = w;
  b.height = h;
  b.yaw = yaw;
  return b;
}

nn::MlpSpec aw_spec() { return nn::MlpSpec{{16, 3}, nn::Activation::ReLU, false, 5}; }

}  // namespace

TEST_CASE("roi_project: box on the optical axis is centered on the principal point") {
  CameraModel cam;
  BevConfig bev;
  const Box3D b = make_box(0.0, 0.0, 20.0, 4.0, 1.6, 1.5, 0.0);
  const auto r = roi_project(b, cam, bev);
  CHECK((r.image.col0 + r.image.col1) / 2 == doctest::Approx(cam.cx).epsilon(1e-9));
  CHECK((r.image.row0 + r.image.row1) / 2 == doctest::Approx(cam.cy).epsilon(1e-9));
}

TEST_CASE("roi_project: image rect is clamped and BEV rect matches the footprint") {
  CameraModel cam;
  BevConfig bev;
  const Box3D b = make_box(0.0, 0.0, 20.0, 4.0, 2.0, 1.5, 0.0);
  const auto r = roi_project(b, cam, bev);
  CHECK(r.bev.rows() == doctest::Approx(20.0));
  CHECK(r.bev.cols() == doctest::Approx(40.0));

  const Box3D edge = make_box(9.0, 0.0, 10.0, 4.0, 4.0, 1.5, 0.0);
  const auto e = roi_project(edge, cam, bev);
  CHECK(e.image.col1 == doctest::Approx(cam.image_width));
  CHECK(e.image.col0 >= 0.0);

  const Box3D behind = make_box(0.0, 0.0, -20.0, 4.0, 2.0, 1.5, 0.0);
  CHECK_THROWS_AS(roi_project(behind, cam, bev), DegenerateGeometry);
}

TEST_CASE("crop_resize: identity, constants and the bilinear midpoint") {
  const auto g = random_grid(6, 5, 3, 1);
  const auto same = crop_resize(g, GridRect{0, 0, 6, 5}, 6, 5);
  for (std::size_t i = 0; i < g.data().size(); ++i) CHECK(same.data()[i] == doctest::Approx(g.data()[i]).epsilon(1e-12));

  const FeatureGrid k(8, 8, 2, 3.25);
  const auto kc = crop_resize(k, GridRect{1.3, 2.1, 6.7, 7.9}, 7, 7);
  for (double v : kc.data()) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));

  const FeatureGrid two(2, 2, 1, std::vector<double>{0, 1, 2, 3});
  const auto up = crop_resize(two, GridRect{0, 0, 2, 2}, 3, 3);
  CHECK(up.at(1, 1, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(up.channels() == 1);

  CHECK_THROWS_AS(crop_resize(g, GridRect{2, 2, 2, 4}, 3, 3), std::invalid_argument);
}

TEST_CASE("point_pool: exact fill, empty box, oversubscription") {
  const Box3D box = make_box(0.0, 0.0, 10.0, 2.0, 2.0, 2.0, 0.0);
  const std::size_t m = 8;
  auto make = [&](std::size_t inside, std::size_t outside) {
    PointCloud pts;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (std::size_t i = 0; i < inside; ++i) pts.push_back(Point3(u(rng), u(rng), 10.0 + u(rng)));
    for (std::size_t i = 0; i < outside; ++i) pts.push_back(Point3(5.0 + u(rng), 0.0, 10.0));
    return pts;
  };

  auto pts = make(m, 5);
  Mat f = Mat::Random(static_cast<Eigen::Index>(pts.size()), 4);
  auto s = point_pool(f, box, pts, m, 0);
  CHECK(s.valid_count == m);
  CHECK(s.features.rows() == static_cast<Eigen::Index>(m));

  PointCloud none = make(0, 5);
  auto e = point_pool(Mat::Random(5, 4), box, none, m, 0);
  CHECK(e.valid_count == 0);
  CHECK(e.features.isZero());
  CHECK(max_pool_points(e) == std::vector<double>(4, 0.0));

  auto many = make(2 * m, 0);
  Mat fm = Mat::Random(static_cast<Eigen::Index>(many.size()), 4);
  auto a = point_pool(fm, box, many, m, 11);
  auto b = point_pool(fm, box, many, m, 11);
  CHECK(a.valid_count == m);
  CHECK(a.features == b.features);

  CHECK_THROWS_AS(point_pool(Mat::Zero(3, 4), box, many, m, 0), std::invalid_argument);
}

TEST_CASE("point_pool + max_pool_points is invariant to point order") {
  const Box3D box = make_box(0.0, 0.0, 10.0, 3.0, 3.0, 3.0, 0.4);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  PointCloud pts;
  for (int i = 0; i < 300; ++i) pts.push_back(Point3(u(rng), -1.0 + 0.5 * u(rng), 10.0 + u(rng)));
  Mat f(static_cast<Eigen::Index>(pts.size()), 3);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    f.row(i) << p.x() * 2.0, p.y() - p.z(), std::sin(p.x() * p.z());
  }
  const auto ref = max_pool_points(point_pool(f, box, pts, 16, 4));

  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud p2;
  Mat f2(f.rows(), f.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p2.push_back(pts[perm[i]]);
    f2.row(static_cast<Eigen::Index>(i)) = f.row(static_cast<Eigen::Index>(perm[i]));
  }
  CHECK(max_pool_points(point_pool(f2, box, p2, 16, 4)) == ref);
}

TEST_CASE("max_pool_points: single row, negative rows with padding, literal mode") {
  PointFeatureSet s;
  s.features = Mat::Zero(4, 2);
  s.features.row(0) << -1.0, -2.0;
  s.valid_count = 1;
  CHECK(max_pool_points(s) == std::vector<double>{-1.0, -2.0});
  CHECK(max_pool_points(s, true) == std::vector<double>{0.0, 0.0});

  s.features.row(1) << -3.0, -0.5;
  s.valid_count = 2;
  CHECK(max_pool_points(s) == std::vector<double>{-1.0, -0.5});
}

TEST_CASE("adaptive_weighting: equal logits, saturation, simplex") {
  const std::size_t S = 3, C = 8;
  AdaptiveWeighting aw(S, C, aw_spec(), 1);
  const auto fi = random_grid(S, S, C, 2), fb = random_grid(S, S, C, 3);
  const auto fp = random_vec(S * S * C, 4);

  aw.zero_output_layer();
  auto r = adaptive_weighting(aw, fi, fb, fp);
  CHECK(r.weights.w_img == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(r.weights.w_bev == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(r.weights.w_pt == doctest::Approx(1.0 / 3).epsilon(1e-12));

  aw.mlp().layers().back().bias.mutable_value() << 50.0, 0.0, 0.0;
  r = adaptive_weighting(aw, fi, fb, fp);
  CHECK(r.weights.w_img == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.weights.w_bev < 1e-20);
  for (std::size_t i = 0; i < fi.data().size(); ++i) CHECK(r.img.data()[i] == doctest::Approx(fi.data()[i]));
  for (double v : r.bev.data()) CHECK(std::abs(v) < 1e-18);

  AdaptiveWeighting fresh(S, C, aw_spec(), 7);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = adaptive_weighting(fresh, random_grid(S, S, C, seed * 3), random_grid(S, S, C, seed * 3 + 1),
                                      random_vec(S * S * C, seed * 3 + 2))
                       .weights;
    CHECK(w.w_img >= 0.0);
    CHECK(w.w_bev >= 0.0);
    CHECK(w.w_pt >= 0.0);
    CHECK(w.w_img + w.w_bev + w.w_pt == doctest::Approx(1.0).epsilon(1e-9));
  }

  CHECK_THROWS_AS(AdaptiveWeighting(S, 6, aw_spec(), 0), std::invalid_argument);
}

TEST_CASE("adaptive_weighting: scaling stage is linear under frozen weights") {
  const std::size_t S = 3, C = 4;
  AdaptiveWeighting aw(S, C, aw_spec(), 3);
  const Mat fi = grid_to_mat(random_grid(S, S, C, 1));
  const Mat fb = grid_to_mat(random_grid(S, S, C, 2));
  const Mat fp = grid_to_mat(random_grid(S, S, C, 3));
  const auto o = aw.forward(nn::constant(fi), nn::constant(fb), nn::constant(fp));
  const Var w = nn::constant(o.weights.value());
  const Var scaled = nn::scale(nn::constant(fi * 2.5), nn::slice_cols(w, 0, 1));
  CHECK((scaled.value() - 2.5 * o.img.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tile_image and tile_bev") {
  const auto g = random_grid(4, 4, 2, 5);
  const auto ti = tile_image(g, 3);
  CHECK(ti.size_z() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t v = 0; v < 4; ++v) {
      for (std::size_t u = 0; u < 4; ++u) {
        for (std::size_t c = 0; c < 2; ++c) CHECK(ti.at(u, v, k, c) == g.at(v, u, c));
      }
    }
  }
  const auto t1 = tile_image(g, 1);
  CHECK(t1.size_z() == 1);

  const auto tb = tile_bev(g, 5);
  CHECK(tb.size_y() == 5);
  const auto back = mean_pool_y(tb);
  for (std::size_t i = 0; i < g.data().size(); ++i) CHECK(back.data()[i] == doctest::Approx(g.data()[i]).epsilon(1e-12));
}

TEST_CASE("rotate_volume_y: identity, quarter turn, near-inverse, mass") {
  const std::size_t S = 7;
  const auto v = random_volume(S, 3, 2, 8);
  CHECK(rotate_volume_y(v, 0.0) == v);

  const auto q = rotate_volume_y(v, std::numbers::pi / 2);
  std::vector<double> a(v.data().begin(), v.data().end()), b(q.data().begin(), q.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
  // content turns by +angle: the +z direction moves to +x
  FeatureVolume spot(S, 1, S, 1);
  spot.at(3, 0, 5, 0) = 1.0;
  const auto turned = rotate_volume_y(spot, std::numbers::pi / 2);
  CHECK(turned.at(5, 0, 3, 0) == doctest::Approx(1.0).epsilon(1e-9));

  // linear field: bilinear is exact wherever every tap lands inside
  const std::size_t L = 21;
  FeatureVolume lin(L, 1, L, 1);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = 0; k < L; ++k) lin.at(i, 0, k, 0) = 0.3 * static_cast<double>(i) - 0.7 * static_cast<double>(k);
  }
  for (double th : {0.1, -0.3, 0.5}) {
    const auto round = rotate_volume_y(rotate_volume_y(lin, th), -th);
    const double c = (L - 1) / 2.0;
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t k = 0; k < L; ++k) {
        if (std::hypot(i - c, k - c) > c - 3.0) continue;
        CHECK(round.at(i, 0, k, 0) == doctest::Approx(lin.at(i, 0, k, 0)).epsilon(1e-6));
      }
    }
  }

  FeatureVolume ones(L, 1, L, 1, 1.0);
  const double c = (L - 1) / 2.0;
  double m0 = 0, m1 = 0;
  const auto r = rotate_volume_y(ones, 0.37);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = 0; k < L; ++k) {
      if (std::hypot(i - c, k - c) > c - 2.0) continue;
      m0 += ones.at(i, 0, k, 0);
      m1 += r.at(i, 0, k, 0);
    }
  }
  CHECK(std::abs(m1 - m0) / m0 < 1e-3);

  CHECK_THROWS_AS(rotate_volume_y(FeatureVolume(3, 1, 4, 1), 0.1), std::invalid_argument);
}

TEST_CASE("azimuth") {
  CHECK(azimuth(make_box(0, 0, 10, 1, 1, 1, 0)) == 0.0);
  CHECK(azimuth(make_box(10, 0, 10, 1, 1, 1, 0)) == doctest::Approx(std::numbers::pi / 4));
  CHECK(azimuth(make_box(-10, 0, 10, 1, 1, 1, 0)) == doctest::Approx(-std::numbers::pi / 4));
  CHECK_THROWS_AS(azimuth(make_box(0, 0, 0, 1, 1, 1, 0)), std::invalid_argument);
}

TEST_CASE("spatial_fuse examples and the y-pool identity") {
  const std::size_t S = 5, C = 2;
  const FeatureGrid zero(S, S, C);
  const auto fp = random_vec(S * S * C, 1);
  const auto half = spatial_fuse(zero, zero, fp, 0.4);
  for (std::size_t i = 0; i < fp.size(); ++i) CHECK(half[i] == doctest::Approx(fp[i] / 2).epsilon(1e-15));

  const auto fb = random_grid(S, S, C, 2);
  const std::vector<double> nopl(S * S * C, 0.0);
  const auto fs = spatial_fuse(zero, fb, nopl, 0.0);
  const auto b3d = tile_bev(fb, S);
  const auto px = mean_pool_x(b3d), pz = mean_pool_z(b3d);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const double expect = px.data()[i] + fb.data()[i] + pz.data()[i];
    CHECK(2.0 * fs[i] == doctest::Approx(expect).epsilon(1e-12));
  }

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto fi = random_grid(S, S, C, 100 + seed), fb2 = random_grid(S, S, C, 200 + seed);
    const auto i3d = rotate_volume_y(tile_image(fi, S), 0.0);
    const auto lhs = mean_pool_y(i3d + tile_bev(fb2, S));
    const auto rhs = mean_pool_y(i3d);
    for (std::size_t i = 0; i < lhs.data().size(); ++i) {
      CHECK(std::abs(lhs.data()[i] - (rhs.data()[i] + fb2.data()[i])) <= 1e-12);
    }
  }

  CHECK_THROWS_AS(spatial_fuse(zero, fb, std::vector<double>(3), 0.0), std::invalid_argument);
}

TEST_CASE("graph form matches the value form") {
  const std::size_t S = 4, C = 4;
  const auto fi = random_grid(S, S, C, 1), fb = random_grid(S, S, C, 2);
  const auto fp = random_vec(S * S * C, 3);
  const auto ref = spatial_fuse(fi, fb, fp, 0.3);
  Mat pl(1, static_cast<Eigen::Index>(fp.size()));
  std::copy(fp.begin(), fp.end(), pl.data());
  const Var g = spatial_fuse(nn::constant(grid_to_mat(fi)), nn::constant(grid_to_mat(fb)), nn::constant(pl), S, 0.3);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(g.value().data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("gradient check through adaptive weighting and spatial fusion") {
  const std::size_t S = 3, C = 4;
  AdaptiveWeighting aw(S, C, nn::MlpSpec{{6, 3}, nn::Activation::ReLU, false, 9}, 2);
  const Var fi = nn::parameter(grid_to_mat(random_grid(S, S, C, 4)));
  const Var fb = nn::parameter(grid_to_mat(random_grid(S, S, C, 5)));
  const Var fp = nn::parameter(grid_to_mat(random_grid(S, S, C, 6)));
  const Mat readout = Mat::Random(1, static_cast<Eigen::Index>(S * S * C));
  auto loss = [&] {
    const auto o = aw.forward(fi, fb, fp);
    const Var fs = spatial_fuse(o.img, o.bev, nn::reshape(o.pt, 1, static_cast<Eigen::Index>(S * S * C)), S, 0.35);
    return nn::matmul(fs, nn::constant(readout.transpose()));
  };
  auto params = aw.parameters();
  params.push_back(fi);
  params.push_back(fb);
  params.push_back(fp);
  const auto r = nn::grad_check(loss, params);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-4);
}
