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

#include <cmath>
#include <random>

#include "doctest.h"
#include "pcfuse/errors.hpp"
#include "pcfuse/nn/adam.hpp"
#include "pcfuse/nn/autodiff.hpp"
#include "pcfuse/nn/gpen.hpp"
#include "pcfuse/nn/grad_check.hpp"
#include "pcfuse/nn/layers.hpp"
#include "pcfuse/nn/losses.hpp"
#include "pcfuse/scene.hpp"

using namespace pcfuse;
using namespace pcfuse::nn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<GpenSample> plane_samples(std::size_t n, std::size_t k, std::uint64_t seed) {
  SceneSpec base;
  base.n_boxes = 0;
  base.clutter_fraction = 0.0;
  base.sensor_noise_sigma = 0.02;
  std::vector<GpenSample> out;
  for (const auto& s : random_specs(n, seed, base, 5.0)) {
    const Scene sc = generate(s);
    out.push_back(GpenSample{sample_points(sc.cloud, k, s.rng_seed), to_params(sc.plane_truth)});
  }
  return out;
}

}  // namespace

TEST_CASE("tensor shape and finiteness") {
  CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1}, {NAN}), NumericalError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.as_matrix()(1, 0) == 4.0);
  CHECK(Tensor::from_matrix(t.as_matrix()).shape() == t.shape());
}

TEST_CASE("elementwise ops pass a gradient check") {
  const Var a = parameter(random_mat(3, 4, 1));
  const Var b = parameter(random_mat(4, 2, 2));
  const Var r = parameter(random_mat(1, 2, 3));
  const Var s = parameter(random_mat(1, 1, 4));
  const std::vector<Var> params{a, b, r, s};
  const auto loss = [&] {
    const Var h = add_row(matmul(a, b), r);
    const Var t = scale(h, s);
    const Var cat = concat_cols(std::vector<Var>{t, reshape(h, 3, 2)});
    const Var rows = concat_rows(std::vector<Var>{cat, slice_cols(cat, 0, 4)});
    const Eigen::Index pick[] = {0, 3, 3, 5};
    return sum_all(matmul(softmax_rows(select_rows(rows, pick)), constant(random_mat(4, 1, 5))));
  };
  const auto res = grad_check(loss, params);
  CHECK(res.checked > 0);
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("nonsmooth ops pass a gradient check away from kinks") {
  const Var a = parameter(random_mat(5, 3, 7));
  const std::vector<Var> params{a};
  Mat target = random_mat(5, 3, 8) * 3.0;
  const auto loss = [&] {
    const Var m = max_rows(relu(a), 4);
    return add(smooth_l1(a, target), mean_all(m));
  };
  const auto res = grad_check(loss, params);
  CHECK(res.max_rel_error < 1e-5);
  const int labels[] = {0, 2, 1, 1, 0};
  const auto ce = [&] { return cross_entropy(a, labels); };
  CHECK(grad_check(ce, params).max_rel_error < 1e-6);
}

TEST_CASE("kinks are detected and skipped") {
  Mat v(1, 2);
  v << 0.0, 1.0;  // relu kink at the first entry
  const Var a = parameter(v);
  const std::vector<Var> params{a};
  const auto res = grad_check([&] { return sum_all(relu(a)); }, params);
  CHECK(res.skipped == 1);
  CHECK(res.checked == 1);
}

TEST_CASE("only perturbations that switch a branch are skipped") {
  Mat v(1, 2);
  v << 2.0, 3.0;
  const Var a = parameter(v);
  const Var zeros = constant(Mat::Zero(1, 2));
  const std::vector<Var> params{a};
  // relu(0) does not depend on a, so nothing switches.
  const auto flat = grad_check([&] { return add(sum_all(relu(zeros)), sum_all(mul(a, 2.0))); }, params);
  CHECK(flat.skipped == 0);
  CHECK(flat.checked == 2);

  Mat t(2, 1);
  t << 1.0, 1.0;  // tied rows: the argmax flips with the sign of the step
  const Var b = parameter(t);
  const std::vector<Var> tied{b};
  const auto res = grad_check([&] { return sum_all(max_rows(b)); }, tied);
  CHECK(res.skipped == 2);
}

TEST_CASE("max_rows with no valid rows is zero") {
  const Var a = constant(random_mat(3, 2, 1));
  CHECK(max_rows(a, 0).value().isZero());
}

TEST_CASE("normalize_plane_head gives a unit normal") {
  const Var a = parameter(random_mat(1, 4, 9));
  const Var p = normalize_plane_head(a);
  CHECK(p.value().leftCols(3).norm() == doctest::Approx(1.0));
  CHECK(p.value()(0, 3) == doctest::Approx(a.value()(0, 3)));
  const std::vector<Var> params{a};
  const Mat w = random_mat(1, 4, 10);
  CHECK(grad_check([&] { return sum_all(matmul(normalize_plane_head(a), constant(w.transpose()))); }, params)
            .max_rel_error < 1e-6);
}

TEST_CASE("smooth L1 and cross entropy values") {
  const Tensor p({1, 3}, {0.5, 2.0, -3.0});
  const Tensor t({1, 3}, {0.0, 0.0, 0.0});
  CHECK(nn::smooth_l1(p, t) == doctest::Approx((0.125 + 1.5 + 2.5) / 3.0));
  CHECK_THROWS(nn::smooth_l1(p, Tensor({3}, {0, 0, 0})));
  const Tensor logits({2, 2}, {0.0, 0.0, 10.0, 0.0});
  const int labels[] = {1, 0};
  CHECK(nn::cross_entropy(logits, labels) == doctest::Approx(0.5 * (std::log(2.0) + std::log1p(std::exp(-10.0)))));
}

TEST_CASE("loss weight defaults") {
  const LossWeights w;
  CHECK(w.alpha_v == 5.0);
  CHECK(w.alpha_d == 50.0);
  CHECK(w.beta_c == 1.0);
  CHECK(w.beta_r == 1.0);
  CHECK(w.gamma_c == 1.0);
  CHECK(w.gamma_r == 5.0);
  CHECK(w.gamma_a == 1.0);
}

TEST_CASE("gpen loss weighting") {
  const PlaneParams label{Eigen::Vector3d(0, -1, 0), -1.65};
  PlaneParams pred = label;
  CHECK(gpen_loss(pred, label) == doctest::Approx(0.0));
  pred.offset += 0.1;  // 50 * 0.5 * 0.01
  CHECK(gpen_loss(pred, label) == doctest::Approx(0.25));
  PlaneParams bad = label;
  bad.normal = Eigen::Vector3d(0, -2, 0);
  CHECK_THROWS_AS(gpen_loss(pred, bad), std::invalid_argument);
}

TEST_CASE("stage losses drop regression terms without positives") {
  const Var logits = constant(random_mat(4, 2, 3));
  const int labels[] = {0, 0, 1, 0};
  const Var empty = constant(Mat(0, 6));
  const Var cls_only = rpn_loss(logits, labels, empty, Mat(0, 6));
  CHECK(cls_only.scalar() == doctest::Approx(cross_entropy(logits, labels).scalar()));
  const Var reg = constant(Mat::Constant(1, 6, 0.5));
  const Var both = rpn_loss(logits, labels, reg, Mat::Zero(1, 6));
  CHECK(both.scalar() == doctest::Approx(cls_only.scalar() + 0.125));
  const Var corners = constant(Mat::Constant(1, 10, 0.5));
  const Var angle = constant(Mat::Constant(1, 2, 0.5));
  const Var ref = refinement_loss(logits, labels, corners, Mat::Zero(1, 10), angle, Mat::Zero(1, 2));
  CHECK(ref.scalar() == doctest::Approx(cls_only.scalar() + 5 * 0.125 + 0.125));
  CHECK(total_loss(1, 2, 3) == 6.0);
}

TEST_CASE("adam single step matches the closed form") {
  Mat v(1, 2);
  v << 1.0, -2.0;
  Var p = parameter(v);
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt({p}, cfg);
  backward(sum_all(mul(p, 3.0)));
  opt.step();
  // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  CHECK(p.value()(0, 0) == doctest::Approx(1.0 - 0.1 * 3 / (3 + 1e-8)));
  CHECK(p.value()(0, 1) == doctest::Approx(-2.0 - 0.1 * 3 / (3 + 1e-8)));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam step decay schedule") {
  Adam opt({parameter(Mat::Zero(1, 1))}, AdamConfig{});
  CHECK(opt.current_lr() == doctest::Approx(1e-3));
  opt.set_schedule_position(9);
  CHECK(opt.current_lr() == doctest::Approx(1e-3));
  opt.set_schedule_position(10);
  CHECK(opt.current_lr() == doctest::Approx(7e-4));
  opt.set_schedule_position(25);
  CHECK(opt.current_lr() == doctest::Approx(1e-3 * 0.49));
  AdamConfig bad;
  bad.lr = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("adam fits a quadratic") {
  Var p = parameter(Mat::Constant(1, 3, 5.0));
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.decay_every = 1000;
  Adam opt({p}, cfg);
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    backward(sum_all(smooth_l1(p, Mat::Constant(1, 3, 1.0))));
    opt.step();
  }
  CHECK((p.value().array() - 1.0).abs().maxCoeff() < 1e-2);
}

TEST_CASE("mlp parameters flatten and assign") {
  Mlp m(3, MlpSpec{{4, 2}, Activation::ReLU, false, 1});
  const auto params = m.parameters();
  CHECK(params.size() == 4);
  auto flat = flatten_parameters(params);
  CHECK(flat.size() == 3 * 4 + 4 + 4 * 2 + 2);
  for (auto& v : flat) v = 0.5;
  assign_parameters(params, flat);
  CHECK(m.layers()[1].bias.value()(0, 1) == 0.5);
  const Mlp c = m.clone();
  m.layers()[0].weight.mutable_value().setZero();
  CHECK(c.layers()[0].weight.value()(0, 0) == 0.5);
  CHECK_THROWS(assign_parameters(params, std::vector<double>(3)));
  CHECK_THROWS(Mlp(3, MlpSpec{{}, Activation::ReLU, false, 1}));
}

TEST_CASE("mlp init is seeded") {
  const Mlp a(5, MlpSpec{{8, 3}, Activation::ReLU, false, 42});
  const Mlp b(5, MlpSpec{{8, 3}, Activation::ReLU, false, 42});
  const Mlp c(5, MlpSpec{{8, 3}, Activation::ReLU, false, 43});
  CHECK(flatten_parameters(a.parameters()) == flatten_parameters(b.parameters()));
  CHECK(flatten_parameters(a.parameters()) != flatten_parameters(c.parameters()));
}

TEST_CASE("gpen forward: shapes, unit normal, permutation invariance") {
  const GpenModel m = GpenModel::create(GpenSpec{{{16, 32}, Activation::ReLU, true, 1}, {{16, 4}, Activation::ReLU, false, 2}, 0.1});
  const Mat pts = random_mat(50, 3, 3) * 5.0;
  const GpenOutput out = gpen_forward(m, Tensor::from_matrix(pts));
  CHECK(out.plane_raw.shape() == std::vector<std::size_t>{4});
  CHECK(out.point_features.shape() == std::vector<std::size_t>{50, 32});
  const double n = std::sqrt(out.plane_raw[0] * out.plane_raw[0] + out.plane_raw[1] * out.plane_raw[1] +
                             out.plane_raw[2] * out.plane_raw[2]);
  CHECK(n == doctest::Approx(1.0));

  Mat shuffled = pts.colwise().reverse();
  const GpenOutput out2 = gpen_forward(m, Tensor::from_matrix(shuffled));
  for (std::size_t i = 0; i < 4; ++i) CHECK(out2.plane_raw[i] == doctest::Approx(out.plane_raw[i]).epsilon(1e-12));

  CHECK_THROWS_AS(gpen_forward(m, Tensor({4, 2})), std::invalid_argument);
  GpenModel broken = m.clone();
  broken.head.layers()[0].weight.mutable_value()(0, 0) = NAN;
  CHECK_THROWS_AS(gpen_forward(broken, Tensor::from_matrix(pts)), NumericalError);
  CHECK_THROWS_AS(GpenModel::create(GpenSpec{{{8}, Activation::ReLU, true, 1}, {{8, 3}, Activation::ReLU, false, 2}, 0.1}),
                  std::invalid_argument);
}

TEST_CASE("gpen gradients") {
  const GpenModel m = GpenModel::create(GpenSpec{{{8, 16}, Activation::ReLU, true, 1}, {{8, 4}, Activation::ReLU, false, 2}, 0.1});
  const auto samples = plane_samples(1, 32, 5);
  const auto params = m.parameters();
  const auto res = grad_check([&] { return gpen_loss(gpen_forward_graph(m, samples[0].points).plane, samples[0].label); },
                              params);
  CHECK(res.checked > 100);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("gpen training lowers the loss and is deterministic") {
  const auto data = plane_samples(40, 64, 1);
  const GpenSpec spec{{{16, 32}, Activation::ReLU, true, 3}, {{16, 4}, Activation::ReLU, false, 4}, 0.1};
  GpenTrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 8;
  tc.adam.lr = 3e-3;
  const auto a = train_gpen(GpenModel::create(spec), data, tc);
  const auto b = train_gpen(GpenModel::create(spec), data, tc);
  REQUIRE(a.history.size() == 15);
  CHECK(a.history.back().loss < 0.5 * a.initial_loss);
  CHECK(a.history.back().step == 15 * 5);
  CHECK(flatten_parameters(a.model.parameters()) == flatten_parameters(b.model.parameters()));
  CHECK(nn::history_csv(a.history) == nn::history_csv(b.history));
}

TEST_CASE("gpen training with lr 0 is flat") {
  const auto data = plane_samples(8, 32, 2);
  GpenTrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.adam.lr = 0.0;
  const GpenModel m = GpenModel::create(GpenSpec{{{8}, Activation::ReLU, true, 1}, {{4}, Activation::ReLU, false, 2}, 0.1});
  const auto r = train_gpen(m, data, tc);
  for (const auto& h : r.history) CHECK(h.loss == doctest::Approx(r.initial_loss).epsilon(1e-12));
  CHECK(flatten_parameters(r.model.parameters()) == flatten_parameters(m.parameters()));
}

TEST_CASE("gpen training rejects non-finite frames") {
  auto data = plane_samples(4, 16, 3);
  data[2].points(0, 0) = NAN;
  GpenTrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 2;
  const GpenModel m = GpenModel::create(GpenSpec{{{8}, Activation::ReLU, true, 1}, {{4}, Activation::ReLU, false, 2}, 0.1});
  CHECK_THROWS_AS(train_gpen(m, data, tc), NumericalError);
}

TEST_CASE("gpen training reports divergence") {
  const auto data = plane_samples(8, 16, 4);
  GpenTrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 2;
  tc.adam.lr = 1e300;
  const GpenModel m = GpenModel::create(GpenSpec{{{8}, Activation::ReLU, true, 1}, {{4}, Activation::ReLU, false, 2}, 0.1});
  CHECK_THROWS_AS(train_gpen(m, data, tc), NumericalError);
}

TEST_CASE("gpen checkpoint round trip") {
  const GpenModel m = GpenModel::create(GpenSpec{{{8, 8}, Activation::ReLU, true, 5}, {{4}, Activation::ReLU, false, 6}, 0.2});
  const GpenModel back = gpen_from_json(gpen_to_json(m));
  CHECK(flatten_parameters(back.parameters()) == flatten_parameters(m.parameters()));
  CHECK(back.input_scale == 0.2);
  CHECK_THROWS_AS(gpen_from_json(nlohmann::json{{"format", "other"}}), DataError);
  CHECK_THROWS_AS(load_gpen("/nonexistent/ckpt.json"), DataError);
}

TEST_CASE("sample_points") {
  PointCloud c(std::vector<Point3>{{0, 0, 1}, {0, 0, 2}});
  const Mat s = sample_points(c, 5, 1);
  CHECK(s.rows() == 5);
  CHECK_THROWS(sample_points(PointCloud{}, 3, 1));
  CHECK_THROWS(sample_points(c, 0, 1));
}
