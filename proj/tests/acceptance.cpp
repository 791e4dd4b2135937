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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "json.hpp"
#include "oracles.hpp"
#include "pcfuse/commands.hpp"
#include "pcfuse/config.hpp"
#include "pcfuse/fusion.hpp"
#include "pcfuse/nn/gpen.hpp"
#include "pcfuse/nn/grad_check.hpp"
#include "pcfuse/plane_fit.hpp"
#include "pcfuse/scene.hpp"

using namespace pcfuse;
using nn::Mat;
using nn::Var;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string f(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "pcfuse_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

FeatureGrid random_grid(std::size_t s, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  FeatureGrid g(s, s, c);
  for (auto& v : g.data()) v = n(rng);
  return g;
}

std::size_t hardware_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1. Plane fitter ordering on the synthetic benchmark.
Verdict plane_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = scratch("bench");
  // Reduced GPEN width and point count so that training on 2000 frames fits
  // the time budget on one core.
  RunConfig cfg = load_config("", {"gpen.point_encoder.widths=[32,64,128]", "gpen.head.widths=[64,32,4]",
                                   "gpen.points_per_frame=128", "gpen.eval_points=128"});
  cfg.output_dir = out.string();
  cfg.workers = hardware_workers();
  std::ostringstream warn;
  cmd_bench_planes(cfg, warn);
  const double secs = seconds_since(t0);

  std::map<std::string, std::pair<double, double>> r;
  for (const auto& row : read_json(out / "bench_planes.json")) {
    r[row.at("method").get<std::string>()] = {std::stod(row.at("rmse_angle_deg").get<std::string>()),
                                              std::stod(row.at("rmse_height_m").get<std::string>())};
  }
  const double ls = r.at("ls").first, pca = r.at("pca").first, ransac = r.at("ransac").first;
  const double gpen = r.at("gpen").first, naive_h = r.at("naive").second;
  const bool c_ransac = ransac < ls;
  const bool c_pca = std::abs(ls - pca) <= 1e-6;
  const bool c_gpen = gpen <= ransac;
  const bool c_naive = naive_h <= 0.02;
  const bool c_time = secs <= 300.0;
  std::string d = "ransac " + f("%.4f", ransac) + " < ls " + f("%.4f", ls) + (c_ransac ? " ok" : " NO") + "; |ls-pca| " +
                  f("%.2e", std::abs(ls - pca)) + (c_pca ? " ok" : " NO") + "; gpen " + f("%.4f", gpen) +
                  " <= ransac" + (c_gpen ? " ok" : " NO") + "; naive height " + f("%.4f", naive_h) + " m" +
                  (c_naive ? " ok" : " NO") + "; " + f("%.0f", secs) + " s" + (c_time ? " ok" : " NO");
  return {c_ransac && c_pca && c_gpen && c_naive && c_time, d};
}

// 2. LS and PCA give the same plane.
Verdict ls_pca() {
  double worst = 0.0;
  SceneSpec base;
  base.points_per_m2 = 0.5;
  base.clutter_fraction = 0.4;
  base.sensor_noise_sigma = 0.05;
  const auto specs = random_specs(200, 2024, base, 10.0);
  for (const auto& s : specs) {
    const Scene sc = generate(s);
    worst = std::max(worst, normal_angle_deg(fit_least_squares(sc.cloud), fit_pca(sc.cloud)));
  }
  return {worst <= 1e-6, "max angle " + f("%.3e", worst) + " deg over 200 clouds"};
}

// 3. Pseudo ground label recovers the generating plane.
Verdict pseudo_label() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_deg = 0.0, worst_m = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tilt(-8.0, 8.0), h(1.2, 2.2), pos(-15.0, 15.0), size(1.0, 5.0);
    std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
    const Plane truth = tilted_plane(tilt(rng), tilt(rng), h(rng));
    std::vector<Box3D> boxes;
    const int n = 1 + static_cast<int>(seed % 5);
    for (int i = 0; i < n; ++i) {
      const double x = pos(rng), z = 25.0 + pos(rng);
      const Vec3& nrm = truth.normal();
      const double y = (truth.offset() - nrm.x() * x - nrm.z() * z) / nrm.y();
      boxes.push_back(box_on_ground(Point3(x, y, z), size(rng), size(rng), size(rng), yaw(rng), nrm));
    }
    const Plane p = pseudo_ground_label(boxes);
    worst_deg = std::max(worst_deg, normal_angle_deg(p, truth));
    worst_m = std::max(worst_m, std::abs(p.offset() - truth.offset()));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_deg <= 1e-6 && worst_m <= 1e-6 && secs < 1.0;
  return {ok, "max " + f("%.2e", worst_deg) + " deg, " + f("%.2e", worst_m) + " m, " + f("%.3f", secs) + " s"};
}

// 4. Finite-difference gradient checks.
Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst[4] = {0, 0, 0, 0};
  std::size_t checked = 0, skipped = 0;
  const auto note = [&](int k, const nn::GradCheckResult& r) {
    worst[k] = std::max(worst[k], r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  };
  const std::size_t S = 3, C = 4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);

    // GPEN on a noisy plane sample.
    const nn::GpenModel g = nn::GpenModel::create(
        nn::GpenSpec{{{16, 32}, nn::Activation::ReLU, true, seed + 1}, {{16, 4}, nn::Activation::ReLU, false, seed + 2}, 0.1});
    SceneSpec ss;
    ss.rng_seed = seed;
    ss.points_per_m2 = 0.3;
    ss.tilt_x_deg = 3.0;
    const Scene sc = generate(ss);
    const Mat pts = nn::sample_points(sc.cloud, 24, seed);
    const nn::PlaneParams label{sc.plane_truth.normal(), sc.plane_truth.offset()};
    note(0, nn::grad_check([&] { return nn::gpen_loss(nn::gpen_forward_graph(g, pts).plane, label); }, g.parameters()));

    // AW MLP with a linear readout of the weights and scaled branches.
    AdaptiveWeighting aw(S, C, nn::MlpSpec{{8, 3}, nn::Activation::ReLU, false, seed + 3}, seed + 4);
    const Var fi = nn::constant(random_mat(S * S, C, rng));
    const Var fb = nn::constant(random_mat(S * S, C, rng));
    const Var fp = nn::constant(random_mat(S * S, C, rng));
    const Var rw = nn::constant(random_mat(3, 1, rng));
    const Var rb = nn::constant(random_mat(C, 1, rng));
    note(1, nn::grad_check(
                [&] {
                  const auto o = aw.forward(fi, fb, fp);
                  const Var branches = nn::add(nn::add(o.img, o.bev), o.pt);
                  return nn::add(nn::matmul(o.weights, rw), nn::sum_all(nn::matmul(branches, rb)));
                },
                aw.parameters()));

    // Refinement heads behind AW and SF, with the refinement loss.
    DetectorModel m;
    m.aw = AdaptiveWeighting(S, C, nn::MlpSpec{{8, 3}, nn::Activation::ReLU, false, seed + 5}, seed + 6);
    m.head = nn::Mlp(S * S * C, nn::MlpSpec{{16, 14}, nn::Activation::ReLU, false, seed + 7});
    PipelineConfig pc;
    pc.synth.grid_size = S;
    pc.synth.channels = C;
    std::vector<RefineInput> inputs(3);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      inputs[i].f_il = random_mat(S * S, C, rng);
      inputs[i].f_bl = random_mat(S * S, C, rng);
      inputs[i].f_pl = random_mat(1, S * S * C, rng);
      inputs[i].azimuth = 0.4 * static_cast<double>(i) - 0.4;
    }
    const std::vector<int> labels{1, 0, 1};
    const std::vector<Eigen::Index> pos{0, 2};
    const Mat corner_t = random_mat(2, 10, rng);
    const Mat angle_t = random_mat(2, 2, rng);
    auto params = m.head.parameters();
    const auto awp = m.aw.parameters();
    params.insert(params.end(), awp.begin(), awp.end());
    note(2, nn::grad_check(
                [&] {
                  const RefineGraph rg = refine_forward(m, inputs, pc);
                  return nn::refinement_loss(rg.logits, labels, nn::select_rows(rg.corners, pos), corner_t,
                                             nn::select_rows(rg.angle, pos), angle_t);
                },
                params));

    // AW + SF + readout, differentiated with respect to the inputs as well.
    const Var pi = nn::parameter(random_mat(S * S, C, rng));
    const Var pb = nn::parameter(random_mat(S * S, C, rng));
    const Var pp = nn::parameter(random_mat(S * S, C, rng));
    const Var readout = nn::constant(random_mat(S * S * C, 1, rng));
    auto all = aw.parameters();
    all.push_back(pi);
    all.push_back(pb);
    all.push_back(pp);
    const double az = 0.3 * static_cast<double>(seed % 5) - 0.6;
    note(3, nn::grad_check(
                [&] {
                  const auto o = aw.forward(pi, pb, pp);
                  const Var fs = spatial_fuse(o.img, o.bev, nn::reshape(o.pt, 1, static_cast<Eigen::Index>(S * S * C)), S, az);
                  return nn::matmul(fs, readout);
                },
                all));
  }
  const double secs = seconds_since(t0);
  const double mx = std::max({worst[0], worst[1], worst[2], worst[3]});
  const std::string d = "gpen " + f("%.1e", worst[0]) + ", aw " + f("%.1e", worst[1]) + ", heads " + f("%.1e", worst[2]) +
                        ", aw+sf " + f("%.1e", worst[3]) + "; " + std::to_string(checked) + " coords, " +
                        std::to_string(skipped) + " skipped at kinks; " + f("%.1f", secs) + " s";
  return {mx < 1e-4 && secs < 120.0, d};
}

// 5. Mean pooling along y collapses the BEV tiling.
Verdict y_pool_identity() {
  double worst = 0.0;
  const std::size_t S = 7, C = 8;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const FeatureGrid fi = random_grid(S, C, rng), fb = random_grid(S, C, rng);
    const FeatureVolume b3d = tile_bev(fb, S);
    const FeatureVolume i3d = rotate_volume_y(tile_image(fi, S), 0.0);
    const FeatureGrid back = mean_pool_y(b3d);
    const FeatureGrid sum = mean_pool_y(i3d + b3d);
    const FeatureGrid img = mean_pool_y(i3d);
    for (std::size_t i = 0; i < fb.data().size(); ++i) {
      worst = std::max(worst, std::abs(back.data()[i] - fb.data()[i]));
      worst = std::max(worst, std::abs(sum.data()[i] - (img.data()[i] + fb.data()[i])));
    }
  }
  return {worst <= 1e-12, "max deviation " + f("%.2e", worst) + " over 100 grid pairs"};
}

// Bilinear read of channel 0 on slab y at fractional (i, k); nullopt outside.
std::optional<double> sample_slab(const FeatureVolume& v, std::size_t y, double i, double k) {
  const double n = static_cast<double>(v.size_x() - 1);
  if (i < 0.0 || k < 0.0 || i > n || k > n) return std::nullopt;
  const auto i0 = static_cast<std::size_t>(std::min(std::floor(i), n - 1.0));
  const auto k0 = static_cast<std::size_t>(std::min(std::floor(k), n - 1.0));
  const double a = i - static_cast<double>(i0), b = k - static_cast<double>(k0);
  return (1 - a) * (1 - b) * v.at(i0, y, k0, 0) + a * (1 - b) * v.at(i0 + 1, y, k0, 0) +
         (1 - a) * b * v.at(i0, y, k0 + 1, 0) + a * b * v.at(i0 + 1, y, k0 + 1, 0);
}

// Normalised correlation of channel 0 between the turned image volume and
// the BEV volume on the middle y slab, with the BEV side read at an offset
// of `lag` cells along (ni, nk).
double slab_corr(const FeatureVolume& img, const FeatureVolume& bev, double lag = 0.0, double ni = 0.0, double nk = 0.0) {
  const int S = static_cast<int>(img.size_x());
  const double c = 0.5 * (S - 1);
  const std::size_t y = img.size_y() / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k < S; ++k) {
      if (std::hypot(i - c, k - c) > c - 1.0) continue;
      const auto b = sample_slab(bev, y, i + lag * ni, k + lag * nk);
      if (!b) continue;
      const double a = img.at(static_cast<std::size_t>(i), y, static_cast<std::size_t>(k), 0);
      sab += a * *b;
      saa += a * a;
      sbb += *b * *b;
    }
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : -1.0;
}

// 6. Stripe features align after turning the image volume by the azimuth.
Verdict rotation_alignment() {
  SceneSpec ss;
  ss.n_boxes = 0;
  ss.points_per_m2 = 0.2;
  const Scene scene = generate(ss);
  SynthConfig cfg;
  cfg.grid_size = 7;
  cfg.channels = 16;
  int ok = 0, total = 0;
  double worst_angle = 0.0;
  for (double az : {std::numbers::pi / 6, -std::numbers::pi / 6, std::numbers::pi / 4, -std::numbers::pi / 4,
                    std::numbers::pi / 3, -std::numbers::pi / 3}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed * 31 + 7);
      std::uniform_real_distribution<double> dist(8.0, 35.0), yaw(-std::numbers::pi, std::numbers::pi);
      Box3D prop;
      const double r = dist(rng);
      prop.center = Point3(r * std::sin(az), 1.0, r * std::cos(az));
      prop.length = 3.9;
      prop.width = 1.6;
      prop.height = 1.56;
      prop.yaw = yaw(rng);
      cfg.seed = seed;
      const SynthFeatures sf = synth_features(scene, prop, cfg);
      const FeatureVolume tiled = tile_image(sf.f_il, cfg.grid_size);
      const FeatureVolume bev = tile_bev(sf.f_bl, cfg.grid_size);

      // Best turning angle on a 1 degree grid.
      double best = -2.0, best_deg = 0.0;
      for (int deg = -90; deg <= 90; ++deg) {
        const double v = slab_corr(rotate_volume_y(tiled, deg * std::numbers::pi / 180.0), bev);
        if (v > best) {
          best = v;
          best_deg = deg;
        }
      }
      // Refine on a 0.05 degree grid around the coarse peak.
      const double coarse = best_deg;
      for (int step = -20; step <= 20; ++step) {
        const double deg = coarse + 0.05 * step;
        const double v = slab_corr(rotate_volume_y(tiled, deg * std::numbers::pi / 180.0), bev);
        if (v > best) {
          best = v;
          best_deg = deg;
        }
      }
      const double err = std::abs(best_deg - az * 180.0 / std::numbers::pi);
      worst_angle = std::max(worst_angle, err);

      // Zero lag across the stripes is a maximum after turning by the
      // azimuth. Lags along the crests leave a stripe pattern unchanged.
      const FeatureVolume turned = rotate_volume_y(tiled, az);
      const double at_zero = slab_corr(turned, bev);
      bool lag_ok = true;
      for (int step = -8; step <= 8; ++step) {
        if (step != 0 && slab_corr(turned, bev, 0.25 * step, std::cos(az), -std::sin(az)) >= at_zero) lag_ok = false;
      }
      // Sign: turning by +azimuth beats turning by -azimuth.
      const double deg_az = az * 180.0 / std::numbers::pi;
      const bool sign_ok = at_zero > slab_corr(rotate_volume_y(tiled, -az), bev) &&
                           std::abs(best_deg - deg_az) < std::abs(best_deg + deg_az);
      ++total;
      if (lag_ok && sign_ok) ++ok;
    }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " cases; worst peak offset " +
                           f("%.2f", worst_angle) + " deg (7x7 grid)"};
}

// 7. IoU, NMS and AP against brute-force oracles.
Verdict geometry_oracles() {
  double worst_iou = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Box3D a = oracle::random_box(rng, 3.0);
    const Box3D b = oracle::jitter(a, rng, 0.8);
    worst_iou = std::max(worst_iou, std::abs(iou_bev(a, b) - oracle::mc_iou_bev(a, b, 1'000'000, seed + 99)));
  }
  int nms_ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 500);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ScoredBox> dets;
    for (int c = 0; c < 6; ++c) {
      const Box3D center = oracle::random_box(rng, 10.0);
      for (int k = 0; k < 8; ++k) dets.push_back({oracle::jitter(center, rng, 0.6), std::round(u(rng) * 20) / 20});
    }
    bool same = true;
    for (double th : {0.01, 0.1, 0.5, 0.7}) same = same && nms(dets, th) == oracle::nms(dets, th);
    nms_ok += same ? 1 : 0;
  }
  double worst_ap = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto scene = oracle::random_eval_scene(seed + 1000, 5);
    std::vector<FrameData> frames;
    for (std::size_t fi = 0; fi < scene.gts.size(); ++fi) {
      FrameData fd;
      fd.frame_id = static_cast<int>(fi);
      fd.gts = scene.gts[fi];
      for (const auto& d : scene.dets[fi]) fd.dets.push_back(Detection{d.box, d.score, fd.frame_id});
      frames.push_back(std::move(fd));
    }
    for (IouKind kind : {IouKind::Bev, IouKind::ThreeD}) {
      worst_ap = std::max(worst_ap, std::abs(evaluate(frames, kind, 0.5).ap -
                                             oracle::ap_all_thresholds(scene.dets, scene.gts, kind, 0.5)));
    }
  }
  const bool ok = worst_iou <= 2e-3 && nms_ok == 50 && worst_ap <= 1e-9;
  return {ok, "iou max err " + f("%.2e", worst_iou) + "; nms " + std::to_string(nms_ok) + "/50; ap max err " +
                  f("%.1e", worst_ap)};
}

// 8. Toy end-to-end detection run.
Verdict toy_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = scratch("demo");
  RunConfig cfg = load_config("", {});
  cfg.output_dir = out.string();
  cfg.workers = hardware_workers();
  cmd_pipeline_demo(cfg);
  const double secs = seconds_since(t0);
  std::map<std::string, std::pair<double, double>> r;
  for (const auto& row : read_json(out / "demo_metrics.json")) {
    r[row.at("setting").get<std::string>()] = {std::stod(row.at("ap").get<std::string>()),
                                               std::stod(row.at("ahs").get<std::string>())};
  }
  const auto clean = r.at("3d@0.7"), noisy = r.at("3d@0.7+heading_noise");
  const bool ok = clean.first >= 1.0 - 1e-9 && clean.second >= 0.99 && noisy.second < noisy.first && secs < 180.0;
  return {ok, "AP3D " + f("%.4f", clean.first) + ", AHS " + f("%.4f", clean.second) + "; with heading noise AP " +
                  f("%.4f", noisy.first) + " AHS " + f("%.4f", noisy.second) + "; " + f("%.0f", secs) + " s"};
}

// 9. Default constants.
Verdict defaults() {
  const RunConfig c = load_config("", {});
  const auto& w = c.pipeline.weights;
  std::vector<std::string> bad;
  const auto want = [&](const char* name, double got, double expect) {
    if (got != expect) bad.push_back(name);
  };
  want("alpha_v", w.alpha_v, 5.0);
  want("alpha_d", w.alpha_d, 50.0);
  want("beta_c", w.beta_c, 1.0);
  want("beta_r", w.beta_r, 1.0);
  want("gamma_c", w.gamma_c, 1.0);
  want("gamma_r", w.gamma_r, 5.0);
  want("gamma_a", w.gamma_a, 1.0);
  want("nms", c.pipeline.nms_thresh, 0.01);
  want("anchor stride", c.anchors.stride, 0.5);
  want("bev cell", c.bev.cell, 0.1);
  want("band low", c.bev.band_lo, -0.2);
  want("band high", c.bev.band_hi, 2.3);
  want("rpn positive", c.pipeline.rpn_iou.positive, 0.5);
  want("rpn negative", c.pipeline.rpn_iou.negative, 0.3);
  want("refine positive", c.pipeline.refine_iou.positive, 0.65);
  want("refine negative", c.pipeline.refine_iou.negative, 0.55);
  const PipelineConfig demo = demo_pipeline_config(c);
  want("demo nms", demo.nms_thresh, 0.01);
  want("demo stride", demo.anchors.stride, 0.5);
  std::string d = bad.empty() ? "all 18 constants match" : "mismatch:";
  for (const auto& b : bad) d += " " + b;
  return {bad.empty(), d};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, plane_ordering}, {2, ls_pca},         {3, pseudo_label},     {4, gradients}, {5, y_pool_identity},
      {6, rotation_alignment}, {7, geometry_oracles}, {8, toy_pipeline}, {9, defaults}};
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
