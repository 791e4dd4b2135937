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

#include "pcfuse/scene.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <stdexcept>

#include "pcfuse/io.hpp"
#include "pcfuse/iou.hpp"

namespace pcfuse {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

struct Rng {
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double normal(double sigma) { return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(gen) : 0.0; }
  std::mt19937_64 gen;
};

double ground_y(const Plane& plane, double x, double z) {
  const Vec3& n = plane.normal();
  return (plane.offset() - n.x() * x - n.z() * z) / n.y();
}

bool in_footprint(const Box3D& b, double x, double z) {
  const double s = std::sin(b.yaw);
  const double c = std::cos(b.yaw);
  const double dx = x - b.center.x();
  const double dz = z - b.center.z();
  return std::abs(c * dx - s * dz) <= 0.5 * b.width && std::abs(s * dx + c * dz) <= 0.5 * b.length;
}

void sample_box_surface(const Box3D& b, std::size_t count, Rng& rng, std::vector<Point3>& out) {
  const double l = b.length, w = b.width, h = b.height;
  // Side faces and the top; the bottom touches the ground and is not seen.
  const double areas[5] = {l * h, l * h, w * h, w * h, l * w};
  const double total = areas[0] + areas[1] + areas[2] + areas[3] + areas[4];
  const Mat3 r = b.rotation();
  for (std::size_t i = 0; i < count; ++i) {
    double pick = rng.uniform(0.0, total);
    int f = 0;
    while (f < 4 && pick > areas[f]) pick -= areas[f++];
    const double a = rng.uniform(-0.5, 0.5);
    const double c = rng.uniform(-0.5, 0.5);
    Vec3 local;  // (across, down, heading)
    switch (f) {
      case 0: local = Vec3(0.5 * w, c * h, a * l); break;
      case 1: local = Vec3(-0.5 * w, c * h, a * l); break;
      case 2: local = Vec3(a * w, c * h, 0.5 * l); break;
      case 3: local = Vec3(a * w, c * h, -0.5 * l); break;
      default: local = Vec3(a * w, -0.5 * h, c * l); break;
    }
    out.push_back(b.center + r * local);
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (n_boxes < 0) throw std::invalid_argument("n_boxes must be nonnegative");
  if (!(clutter_fraction >= 0.0 && clutter_fraction <= 1.0)) throw std::invalid_argument("clutter_fraction must be in [0, 1]");
  if (!(points_per_m2 >= 0.0)) throw std::invalid_argument("points_per_m2 must be nonnegative");
  if (!(sensor_noise_sigma >= 0.0)) throw std::invalid_argument("sensor noise must be nonnegative");
  if (!(height > 0.0)) throw std::invalid_argument("plane height must be positive");
  if (!(x_max > x_min) || !(z_max > z_min)) throw std::invalid_argument("scene extents must be nonempty");
  if (std::abs(tilt_x_deg) >= 45.0 || std::abs(tilt_z_deg) >= 45.0) throw std::invalid_argument("tilt must stay below 45 degrees");
}

Plane tilted_plane(double tilt_x_deg, double tilt_z_deg, double height) {
  const Mat3 rx = Eigen::AngleAxisd(tilt_x_deg * kDeg, Vec3::UnitX()).toRotationMatrix();
  const Mat3 rz = Eigen::AngleAxisd(tilt_z_deg * kDeg, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 n = rz * rx * Vec3(0.0, -1.0, 0.0);
  return Plane::from_coefficients(n.x(), n.y(), n.z(), -height);
}

Scene generate(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  Scene s;
  s.plane_truth = tilted_plane(spec.tilt_x_deg, spec.tilt_z_deg, spec.height);
  const Vec3 n = s.plane_truth.normal();

  const double fov = s.cam.cx / s.cam.fx;
  for (int i = 0; i < spec.n_boxes; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double z = rng.uniform(std::min(spec.z_min + 5.0, spec.z_max), std::max(spec.z_max - 3.0, spec.z_min));
      const double half = std::max(0.0, std::min(std::max(std::abs(spec.x_min), std::abs(spec.x_max)) - 2.0, 0.7 * fov * z));
      const double x = std::clamp(rng.uniform(-half, half), spec.x_min, spec.x_max);
      const double l = std::clamp(3.9 + rng.normal(0.2), 3.2, 4.6);
      const double w = std::clamp(1.6 + rng.normal(0.08), 1.4, 1.8);
      const double h = std::clamp(1.56 + rng.normal(0.08), 1.35, 1.75);
      const double yaw = normalize_angle(rng.uniform(-kPi, kPi));
      const Box3D b = box_on_ground(Point3(x, ground_y(s.plane_truth, x, z), z), l, w, h, yaw, n);
      Box3D grown = b;
      grown.length += 1.0;
      grown.width += 1.0;
      bool clear = true;
      for (const auto& g : s.gts) clear = clear && iou_bev(grown, g) == 0.0;
      if (clear) {
        s.gts.push_back(b);
        break;
      }
    }
  }

  std::vector<Point3> pts;
  std::vector<PointKind> kinds;
  const double area = (spec.x_max - spec.x_min) * (spec.z_max - spec.z_min);
  const auto n_ground = static_cast<std::size_t>(std::llround(spec.points_per_m2 * area));
  for (std::size_t i = 0; i < n_ground; ++i) {
    const double x = rng.uniform(spec.x_min, spec.x_max);
    const double z = rng.uniform(spec.z_min, spec.z_max);
    bool covered = false;
    for (const auto& b : s.gts) covered = covered || in_footprint(b, x, z);
    if (covered) continue;
    pts.emplace_back(x, ground_y(s.plane_truth, x, z), z);
    kinds.push_back(PointKind::Ground);
  }
  for (const auto& b : s.gts) {
    const double face_area = 2.0 * (b.length + b.width) * b.height + b.length * b.width;
    const std::size_t before = pts.size();
    sample_box_surface(b, static_cast<std::size_t>(std::llround(spec.points_per_m2 * face_area)), rng, pts);
    kinds.resize(kinds.size() + (pts.size() - before), PointKind::Object);
  }

  const double frac = std::min(spec.clutter_fraction, 0.95);
  const auto n_clutter = static_cast<std::size_t>(std::llround(frac / (1.0 - frac) * static_cast<double>(pts.size())));
  if (n_clutter > 0) {
    struct Wall { double x, z, yaw, len, h; };
    struct Pole { double x, z, r, h; };
    std::vector<Wall> walls;
    std::vector<Pole> poles;
    for (int i = 0; i < 3; ++i) {
      walls.push_back({rng.uniform(spec.x_min, spec.x_max), rng.uniform(spec.z_min, spec.z_max), rng.uniform(-kPi, kPi),
                       rng.uniform(3.0, 10.0), rng.uniform(1.0, 3.0)});
    }
    for (int i = 0; i < 6; ++i) {
      poles.push_back({rng.uniform(spec.x_min, spec.x_max), rng.uniform(spec.z_min, spec.z_max), rng.uniform(0.05, 0.15),
                       rng.uniform(2.0, 5.0)});
    }
    for (std::size_t i = 0; i < n_clutter; ++i) {
      double x, z, up;
      if (rng.uniform(0.0, 1.0) < 0.7) {
        const Wall& w = walls[static_cast<std::size_t>(rng.uniform(0.0, 3.0)) % walls.size()];
        const double t = rng.uniform(-0.5, 0.5) * w.len;
        x = w.x + t * std::sin(w.yaw);
        z = w.z + t * std::cos(w.yaw);
        up = rng.uniform(0.0, w.h);
      } else {
        const Pole& p = poles[static_cast<std::size_t>(rng.uniform(0.0, 6.0)) % poles.size()];
        const double a = rng.uniform(-kPi, kPi);
        x = p.x + p.r * std::sin(a);
        z = p.z + p.r * std::cos(a);
        up = rng.uniform(0.0, p.h);
      }
      pts.emplace_back(x, ground_y(s.plane_truth, x, z) - up, z);
      kinds.push_back(PointKind::Clutter);
    }
  }

  if (spec.sensor_noise_sigma > 0.0) {
    for (auto& p : pts) {
      p.x() += rng.normal(spec.sensor_noise_sigma);
      p.y() += rng.normal(spec.sensor_noise_sigma);
      p.z() += rng.normal(spec.sensor_noise_sigma);
    }
  }
  s.cloud = PointCloud(std::move(pts));
  s.kinds = std::move(kinds);
  return s;
}

std::vector<SceneSpec> random_specs(std::size_t n, std::uint64_t seed, const SceneSpec& base, double max_tilt_deg) {
  Rng rng(seed);
  std::vector<SceneSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    SceneSpec s = base;
    s.rng_seed = seed * 1000003ULL + i;
    s.tilt_x_deg = rng.uniform(-max_tilt_deg, max_tilt_deg);
    s.tilt_z_deg = rng.uniform(-max_tilt_deg, max_tilt_deg);
    out.push_back(s);
  }
  return out;
}

SynthFeatures synth_features(const Scene& scene, const Box3D& proposal, const SynthConfig& cfg) {
  const std::size_t S = cfg.grid_size;
  const std::size_t C = cfg.channels;
  if (S == 0 || C == 0) throw std::invalid_argument("synthetic grids need positive extents");
  if (cfg.oracle && C < 14) throw std::invalid_argument("oracle features need at least 14 channels");
  if (!(cfg.stripe_period > 0.0)) throw std::invalid_argument("stripe period must be positive");

  SynthFeatures out;
  out.f_il = FeatureGrid(S, S, C);
  out.f_bl = FeatureGrid(S, S, C);
  for (std::size_t g = 0; g < scene.gts.size(); ++g) {
    const double v = iou_bev(proposal, axis_aligned_box(scene.gts[g]));
    if (v > out.objectness) {
      out.objectness = v;
      out.matched_gt = static_cast<int>(g);
    }
  }

  Rng rng(cfg.seed);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double omega = 2.0 * kPi / cfg.stripe_period;
  const double az = azimuth(proposal);
  const double ca = std::cos(az);
  const double sa = std::sin(az);
  const double c0 = 0.5 * static_cast<double>(S - 1);
  for (std::size_t r = 0; r < S; ++r) {
    for (std::size_t c = 0; c < S; ++c) {
      const double dr = static_cast<double>(r) - c0;
      const double dc = static_cast<double>(c) - c0;
      // Image: rows are v, columns u. BEV: rows x, columns z.
      out.f_il.at(r, c, 0) = std::cos(omega * dc + phase);
      out.f_bl.at(r, c, 0) = std::cos(omega * (dr * ca - dc * sa) + phase);
    }
  }
  if (cfg.oracle) {
    const RefinementTarget t = out.matched_gt >= 0
                                   ? encode_refinement(proposal, scene.gts[static_cast<std::size_t>(out.matched_gt)])
                                   : encode_refinement(proposal, proposal);
    for (std::size_t r = 0; r < S; ++r) {
      for (std::size_t c = 0; c < S; ++c) {
        out.f_il.at(r, c, 1) = out.objectness;
        out.f_bl.at(r, c, 1) = out.objectness;
        for (std::size_t k = 0; k < t.size(); ++k) out.f_bl.at(r, c, 2 + k) = t[k];
      }
    }
  }

  // Point features: seeded plane waves over box-local coordinates.
  const std::size_t width = S * S * C;
  nn::Mat waves(static_cast<Eigen::Index>(width), 4);
  for (Eigen::Index j = 0; j < waves.rows(); ++j) {
    waves(j, 0) = rng.normal(1.0);
    waves(j, 1) = rng.normal(1.0);
    waves(j, 2) = rng.normal(1.0);
    waves(j, 3) = rng.uniform(0.0, 2.0 * kPi);
  }
  const double reach = 0.5 * std::sqrt(proposal.length * proposal.length + proposal.width * proposal.width +
                                       proposal.height * proposal.height);
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    const Point3& p = scene.cloud[i];
    if (std::abs(p.x() - proposal.center.x()) > reach || std::abs(p.z() - proposal.center.z()) > reach) continue;
    if (contains(proposal, p)) inside.push_back(i);
  }
  const PointCloud sub = scene.cloud.select(inside);
  const Mat3 rt = proposal.rotation().transpose();
  nn::Mat feats(static_cast<Eigen::Index>(sub.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < sub.size(); ++i) {
    const Vec3 local = rt * (sub[i] - proposal.center);
    for (Eigen::Index j = 0; j < waves.rows(); ++j) {
      feats(static_cast<Eigen::Index>(i), j) =
          std::cos(waves(j, 0) * local.x() + waves(j, 1) * local.y() + waves(j, 2) * local.z() + waves(j, 3));
    }
  }
  out.points = point_pool(feats, proposal, sub, cfg.point_pool, cfg.seed);
  return out;
}

void export_kitti(const Scene& scene, const std::string& dir, int frame_id) {
  namespace fs = std::filesystem;
  char id[16];
  std::snprintf(id, sizeof(id), "%06d", frame_id);
  for (const char* sub : {"velodyne", "label_2", "calib"}) fs::create_directories(fs::path(dir) / sub);
  const RigidTransform swap = kitti_axis_swap();
  write_velodyne_bin((fs::path(dir) / "velodyne" / (std::string(id) + ".bin")).string(), transform(scene.cloud, swap.inverse()));
  std::vector<KittiLabel> labels;
  for (const auto& b : scene.gts) labels.push_back(box_to_label(b, scene.cam));
  write_kitti_labels((fs::path(dir) / "label_2" / (std::string(id) + ".txt")).string(), labels);
  write_kitti_calib((fs::path(dir) / "calib" / (std::string(id) + ".txt")).string(), KittiCalib{scene.cam, swap});
}

}  // namespace pcfuse
