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

#include "pcfuse/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "pcfuse/errors.hpp"

namespace pcfuse {

namespace {

static_assert(std::endian::native == std::endian::little, "float32 files assume a little-endian host");

std::vector<float> read_floats(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(float) != 0) throw DataError(path + ": size is not a multiple of 4 bytes");
  std::vector<float> v(bytes / sizeof(float));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("short read on " + path);
  return v;
}

void write_floats(const std::string& path, const std::vector<float>& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!out) throw DataError("write failed on " + path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

PointCloud read_velodyne_bin(const std::string& path) {
  const auto v = read_floats(path);
  if (v.size() % 4 != 0) throw DataError(path + ": expected x, y, z, r records");
  std::vector<Point3> pts;
  std::vector<double> refl;
  pts.reserve(v.size() / 4);
  refl.reserve(v.size() / 4);
  for (std::size_t i = 0; i < v.size(); i += 4) {
    if (!std::isfinite(v[i]) || !std::isfinite(v[i + 1]) || !std::isfinite(v[i + 2])) {
      throw DataError(path + ": non-finite coordinate");
    }
    pts.emplace_back(v[i], v[i + 1], v[i + 2]);
    refl.push_back(std::clamp(static_cast<double>(v[i + 3]), 0.0, 1.0));
  }
  return PointCloud(std::move(pts), std::move(refl));
}

void write_velodyne_bin(const std::string& path, const PointCloud& cloud) {
  std::vector<float> v;
  v.reserve(cloud.size() * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    v.push_back(static_cast<float>(p.x()));
    v.push_back(static_cast<float>(p.y()));
    v.push_back(static_cast<float>(p.z()));
    v.push_back(cloud.has_reflectance() ? static_cast<float>(cloud.reflectance()[i]) : 0.0f);
  }
  write_floats(path, v);
}

PointCloud read_text_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Point3> pts;
  std::vector<double> refl;
  bool with_r = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> vals;
    double d;
    while (ls >> d) vals.push_back(d);
    if (!ls.eof()) throw DataError(path + ":" + std::to_string(lineno) + ": not a number");
    if (vals.empty()) continue;
    if (vals.size() != 3 && vals.size() != 4) throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 or 4 values");
    if (pts.empty()) with_r = vals.size() == 4;
    if (with_r != (vals.size() == 4)) throw DataError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    pts.emplace_back(vals[0], vals[1], vals[2]);
    if (with_r) refl.push_back(vals[3]);
  }
  try {
    return with_r ? PointCloud(std::move(pts), std::move(refl)) : PointCloud(std::move(pts));
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_text_cloud(const std::string& path, const PointCloud& cloud) {
  std::ostringstream out;
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    if (cloud.has_reflectance()) {
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g\n", p.x(), p.y(), p.z(), cloud.reflectance()[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    }
    out << buf;
  }
  write_text_file(path, out.str());
}

RigidTransform kitti_axis_swap() {
  RigidTransform t;
  t.rotation << 0, -1, 0,  //
      0, 0, -1,            //
      1, 0, 0;
  return t;
}

KittiCalib read_kitti_calib(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::map<std::string, std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::istringstream ls(line.substr(colon + 1));
    std::vector<double> v;
    double d;
    while (ls >> d) v.push_back(d);
    rows[line.substr(0, colon)] = v;
  }
  auto need = [&](const std::string& key, std::size_t n) -> const std::vector<double>& {
    auto it = rows.find(key);
    if (it == rows.end() || it->second.size() != n) throw DataError(path + ": missing or malformed " + key);
    return it->second;
  };
  const auto& p2 = need("P2", 12);
  KittiCalib c;
  c.camera.fx = p2[0];
  c.camera.cx = p2[2];
  c.camera.fy = p2[5];
  c.camera.cy = p2[6];
  const auto& r0 = need("R0_rect", 9);
  const auto& tr = need("Tr_velo_to_cam", 12);
  Mat3 r0m;
  Mat3 rm;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r0m(i, j) = r0[static_cast<std::size_t>(3 * i + j)];
      rm(i, j) = tr[static_cast<std::size_t>(4 * i + j)];
    }
    t(i) = tr[static_cast<std::size_t>(4 * i + 3)];
  }
  c.velo_to_cam.rotation = r0m * rm;
  c.velo_to_cam.translation = r0m * t;
  try {
    c.camera.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
  return c;
}

void write_kitti_calib(const std::string& path, const KittiCalib& calib) {
  const auto& k = calib.camera;
  std::ostringstream out;
  out << "P2: " << fmt(k.fx) << " 0 " << fmt(k.cx) << " 0 0 " << fmt(k.fy) << " " << fmt(k.cy) << " 0 0 0 1 0\n";
  out << "R0_rect: 1 0 0 0 1 0 0 0 1\n";
  out << "Tr_velo_to_cam:";
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out << ' ' << fmt(calib.velo_to_cam.rotation(i, j));
    out << ' ' << fmt(calib.velo_to_cam.translation(i));
  }
  out << '\n';
  write_text_file(path, out.str());
}

std::vector<KittiLabel> read_kitti_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<KittiLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    KittiLabel l;
    if (!(ls >> l.type)) continue;
    ls >> l.truncation >> l.occlusion >> l.alpha >> l.bbox[0] >> l.bbox[1] >> l.bbox[2] >> l.bbox[3] >> l.h >> l.w >> l.l >>
        l.x >> l.y >> l.z >> l.ry;
    if (!ls) throw DataError(path + ":" + std::to_string(lineno) + ": malformed label");
    double score;
    if (ls >> score) l.score = score;
    out.push_back(l);
  }
  return out;
}

void write_kitti_labels(const std::string& path, const std::vector<KittiLabel>& labels) {
  std::ostringstream out;
  for (const auto& l : labels) {
    out << l.type << ' ' << fmt2(l.truncation) << ' ' << l.occlusion << ' ' << fmt2(l.alpha);
    for (double b : l.bbox) out << ' ' << fmt2(b);
    out << ' ' << fmt2(l.h) << ' ' << fmt2(l.w) << ' ' << fmt2(l.l) << ' ' << fmt2(l.x) << ' ' << fmt2(l.y) << ' '
        << fmt2(l.z) << ' ' << fmt2(l.ry);
    if (l.score) out << ' ' << fmt(*l.score);
    out << '\n';
  }
  write_text_file(path, out.str());
}

Box3D label_to_box(const KittiLabel& l) {
  return box_on_ground(Point3(l.x, l.y, l.z), l.l, l.w, l.h, normalize_angle(l.ry + 0.5 * std::numbers::pi));
}

KittiLabel box_to_label(const Box3D& b, const CameraModel& cam, std::optional<double> score, const std::string& type) {
  KittiLabel l;
  l.type = type;
  l.h = b.height;
  l.w = b.width;
  l.l = b.length;
  const Point3 bc = b.bottom_center();
  l.x = bc.x();
  l.y = bc.y();
  l.z = bc.z();
  l.ry = normalize_angle(b.yaw - 0.5 * std::numbers::pi);
  l.alpha = normalize_angle(l.ry - std::atan2(bc.x(), bc.z()));
  double u0 = 1e300, v0 = 1e300, u1 = -1e300, v1 = -1e300;
  for (const auto& p : box_corners(b)) {
    if (auto px = project_point(cam, p)) {
      u0 = std::min(u0, px->u);
      v0 = std::min(v0, px->v);
      u1 = std::max(u1, px->u);
      v1 = std::max(v1, px->v);
    }
  }
  if (u0 <= u1) {
    l.bbox[0] = std::clamp(u0, 0.0, static_cast<double>(cam.image_width));
    l.bbox[1] = std::clamp(v0, 0.0, static_cast<double>(cam.image_height));
    l.bbox[2] = std::clamp(u1, 0.0, static_cast<double>(cam.image_width));
    l.bbox[3] = std::clamp(v1, 0.0, static_cast<double>(cam.image_height));
  }
  l.score = score;
  return l;
}

LabelMeta label_meta(const KittiLabel& l) { return LabelMeta{l.truncation, l.occlusion, l.bbox[3] - l.bbox[1]}; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed on " + path);
}

void write_tensor(const std::string& stem, const std::vector<std::size_t>& shape, std::span<const double> data,
                  const nlohmann::json& extra) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  if (n != data.size()) throw std::invalid_argument("tensor data length does not match shape");
  nlohmann::json h = extra;
  h["shape"] = shape;
  h["dtype"] = "float32le";
  write_text_file(stem + ".json", h.dump(1) + "\n");
  std::vector<float> f(data.begin(), data.end());
  write_floats(stem + ".bin", f);
}

TensorFile read_tensor(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw DataError("cannot open " + stem + ".json");
  TensorFile t;
  try {
    t.header = nlohmann::json::parse(in);
    t.shape = t.header.at("shape").get<std::vector<std::size_t>>();
    if (t.header.at("dtype").get<std::string>() != "float32le") throw DataError(stem + ": unsupported dtype");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(stem + ".json: " + e.what());
  }
  const auto f = read_floats(stem + ".bin");
  std::size_t n = 1;
  for (auto s : t.shape) n *= s;
  if (f.size() != n) throw DataError(stem + ": data length does not match the header");
  t.data.assign(f.begin(), f.end());
  return t;
}

void write_grid(const std::string& stem, const FeatureGrid& g, const nlohmann::json& extra) {
  write_tensor(stem, {g.height(), g.width(), g.channels()}, g.data(), extra);
}

FeatureGrid read_grid(const std::string& stem) {
  TensorFile t = read_tensor(stem);
  if (t.shape.size() != 3) throw DataError(stem + ": expected a rank-3 grid");
  return FeatureGrid(t.shape[0], t.shape[1], t.shape[2], std::move(t.data));
}

}  // namespace pcfuse
