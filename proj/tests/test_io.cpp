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
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "pcfuse/errors.hpp"
#include "pcfuse/io.hpp"

using namespace pcfuse;

namespace {

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

void write_raw(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("velodyne round trip keeps float32 precision") {
  PointCloud c;
  c.push_back(Point3(1.5, -2.25, 30.125), 0.5);
  c.push_back(Point3(-7.0, 0.1, 3.3), 0.0);
  const auto p = tmp("pcfuse_io.bin").string();
  write_velodyne_bin(p, c);
  const auto back = read_velodyne_bin(p);
  REQUIRE(back.size() == 2);
  CHECK(back.has_reflectance());
  CHECK(back[0] == c[0]);
  CHECK((back[1] - c[1]).norm() < 1e-6);
  CHECK(back.reflectance()[0] == 0.5);
  CHECK(std::filesystem::file_size(p) == 32);
}

TEST_CASE("velodyne errors") {
  CHECK_THROWS_AS(read_velodyne_bin(tmp("pcfuse_missing.bin").string()), DataError);
  write_raw(tmp("pcfuse_short.bin"), std::string(10, '\0'));
  CHECK_THROWS_AS(read_velodyne_bin(tmp("pcfuse_short.bin").string()), DataError);
}

TEST_CASE("text clouds") {
  write_raw(tmp("pcfuse_cloud.txt"), "# comment\n1 2 3\n\n4 5 6\n");
  const auto c = read_text_cloud(tmp("pcfuse_cloud.txt").string());
  REQUIRE(c.size() == 2);
  CHECK(c[1] == Point3(4, 5, 6));
  write_text_cloud(tmp("pcfuse_cloud2.txt").string(), c);
  CHECK(read_text_cloud(tmp("pcfuse_cloud2.txt").string()).points() == c.points());
  write_raw(tmp("pcfuse_cloud_mixed.txt"), "1 2 3\n4 5 6 0.7\n");
  CHECK_THROWS_AS(read_text_cloud(tmp("pcfuse_cloud_mixed.txt").string()), DataError);
  write_raw(tmp("pcfuse_cloud_bad.txt"), "1 2\n");
  CHECK_THROWS_AS(read_text_cloud(tmp("pcfuse_cloud_bad.txt").string()), DataError);
  write_raw(tmp("pcfuse_cloud_nan.txt"), "1 2 nan\n");
  CHECK_THROWS_AS(read_text_cloud(tmp("pcfuse_cloud_nan.txt").string()), DataError);
}

TEST_CASE("calibration round trip") {
  KittiCalib k;
  k.camera.fx = 700.0;
  k.camera.cx = 600.0;
  k.velo_to_cam = kitti_axis_swap();
  k.velo_to_cam.translation = Vec3(0.1, -0.05, -0.3);
  const auto p = tmp("pcfuse_calib.txt").string();
  write_kitti_calib(p, k);
  const auto back = read_kitti_calib(p);
  CHECK(back.camera.fx == doctest::Approx(700.0));
  CHECK(back.camera.cx == doctest::Approx(600.0));
  CHECK((back.velo_to_cam.rotation - k.velo_to_cam.rotation).norm() < 1e-9);
  CHECK((back.velo_to_cam.translation - k.velo_to_cam.translation).norm() < 1e-9);
  // LiDAR forward (x) is camera forward (z)
  CHECK((kitti_axis_swap().apply(Point3(1, 0, 0)) - Point3(0, 0, 1)).norm() < 1e-12);
  CHECK((kitti_axis_swap().apply(Point3(0, 0, 1)) - Point3(0, -1, 0)).norm() < 1e-12);

  write_raw(tmp("pcfuse_calib_bad.txt"), "P2: 1 2 3\n");
  CHECK_THROWS_AS(read_kitti_calib(tmp("pcfuse_calib_bad.txt").string()), DataError);
}

TEST_CASE("labels round trip and box conversion") {
  Box3D b;
  b.center = Point3(2.0, 0.9, 15.0);
  b.length = 4.0;
  b.width = 1.7;
  b.height = 1.5;
  b.yaw = 0.3;
  CameraModel cam;
  const KittiLabel l = box_to_label(b, cam, 0.8);
  CHECK(l.y == doctest::Approx(b.y_bottom()));
  CHECK(l.ry == doctest::Approx(b.yaw - std::numbers::pi / 2));
  CHECK(l.bbox[2] > l.bbox[0]);
  const Box3D r = label_to_box(l);
  CHECK((r.center - b.center).norm() < 1e-12);
  CHECK(r.yaw == doctest::Approx(b.yaw));

  const auto p = tmp("pcfuse_labels.txt").string();
  write_kitti_labels(p, {l, box_to_label(b, cam)});
  const auto back = read_kitti_labels(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].score.has_value());
  CHECK(*back[0].score == doctest::Approx(0.8));
  CHECK(!back[1].score.has_value());
  CHECK(back[0].l == doctest::Approx(4.0));
  CHECK(back[0].type == "Car");

  const auto meta = label_meta(back[0]);
  CHECK(meta.bbox_height == doctest::Approx(l.bbox[3] - l.bbox[1]).epsilon(1e-2));

  write_raw(tmp("pcfuse_labels_bad.txt"), "Car 0 0 0 1 2 3\n");
  CHECK_THROWS_AS(read_kitti_labels(tmp("pcfuse_labels_bad.txt").string()), DataError);
}

TEST_CASE("tensors and grids") {
  const auto stem = tmp("pcfuse_tensor").string();
  write_tensor(stem, {2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6.5}, {{"note", "x"}});
  const auto t = read_tensor(stem);
  CHECK(t.shape == std::vector<std::size_t>{2, 3});
  CHECK(t.data[5] == 6.5);
  CHECK(t.header.at("note") == "x");
  CHECK_THROWS_AS(write_tensor(stem, {4}, std::vector<double>{1.0}), std::invalid_argument);

  FeatureGrid g(2, 3, 2);
  g.at(1, 2, 1) = 0.25;
  write_grid(stem + "_g", g);
  CHECK(read_grid(stem + "_g") == g);

  write_raw(stem + "_bad.json", R"({"shape": [3], "dtype": "float32le"})");
  write_raw(stem + "_bad.bin", std::string(8, '\0'));
  CHECK_THROWS_AS(read_tensor(stem + "_bad"), DataError);
  CHECK_THROWS_AS(read_tensor(stem + "_none"), DataError);
}
