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

#include "pcfuse/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pcfuse/anchors.hpp"
#include "pcfuse/bev.hpp"
#include "pcfuse/errors.hpp"
#include "pcfuse/nn/gpen.hpp"
#include "pcfuse/parallel.hpp"
#include "pcfuse/pipeline.hpp"
#include "pcfuse/plane_fit.hpp"
#include "pcfuse/scene.hpp"

namespace pcfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return (fs::path(cfg.output_dir) / name).string();
}

void write_json(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// CSV with a header row; rows are already formatted cells.
std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
  return out.str();
}

json csv_rows_json(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json o = json::object();
    for (std::size_t i = 0; i < header.size(); ++i) o[header[i]] = r[i];
    arr.push_back(o);
  }
  return arr;
}

void write_table(const RunConfig& cfg, const std::string& stem, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  write_text_file(out_path(cfg, stem + ".csv"), csv(header, rows));
  write_json(out_path(cfg, stem + ".json"), csv_rows_json(header, rows));
}

std::string frame_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", id);
  return buf;
}

std::vector<DatasetFrame> synthetic_frames(const RunConfig& cfg, std::size_t n, std::uint64_t seed) {
  const auto specs = random_specs(n, seed, cfg.dataset.scene, cfg.dataset.max_tilt_deg);
  std::vector<DatasetFrame> frames(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    Scene s = generate(specs[i]);
    DatasetFrame& f = frames[i];
    f.frame_id = static_cast<int>(i);
    f.cloud = filter_fov(s.cloud, s.cam);
    f.plane_truth = s.plane_truth;
    f.gts = std::move(s.gts);
    f.meta.assign(f.gts.size(), LabelMeta{});
    f.cam = s.cam;
  });
  return frames;
}

std::vector<DatasetFrame> kitti_frames(const RunConfig& cfg, std::size_t n, std::ostream& warn, std::size_t* skipped) {
  const fs::path root(cfg.data_dir);
  const fs::path velo = root / "velodyne";
  if (!fs::is_directory(velo)) throw DataError("no velodyne directory under " + cfg.data_dir);
  std::vector<fs::path> bins;
  for (const auto& e : fs::directory_iterator(velo)) {
    if (e.path().extension() == ".bin") bins.push_back(e.path());
  }
  std::sort(bins.begin(), bins.end());
  if (bins.size() > n) bins.resize(n);
  std::vector<DatasetFrame> frames;
  for (const auto& bin : bins) {
    const std::string stem = bin.stem().string();
    try {
      DatasetFrame f;
      f.frame_id = std::stoi(stem);
      const KittiCalib calib = read_kitti_calib((root / "calib" / (stem + ".txt")).string());
      f.cam = calib.camera;
      f.cloud = filter_fov(transform(read_velodyne_bin(bin.string()), calib.velo_to_cam), f.cam);
      for (const auto& l : read_kitti_labels((root / "label_2" / (stem + ".txt")).string())) {
        if (l.type != cfg.eval.class_name) continue;
        f.gts.push_back(label_to_box(l));
        f.meta.push_back(label_meta(l));
      }
      if (f.gts.empty()) throw DataError("no " + cfg.eval.class_name + " labels for a pseudo ground label");
      f.plane_truth = pseudo_ground_label(f.gts);
      frames.push_back(std::move(f));
    } catch (const std::exception& e) {
      warn << "warning: skipping frame " << stem << ": " << e.what() << '\n';
      if (skipped) ++*skipped;
    }
  }
  return frames;
}

std::vector<nn::GpenSample> gpen_samples(std::span<const DatasetFrame> frames, std::size_t k, std::uint64_t seed) {
  std::vector<nn::GpenSample> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.cloud.empty()) continue;
    const Plane label = f.gts.empty() ? f.plane_truth : pseudo_ground_label(f.gts);
    out.push_back(nn::GpenSample{nn::sample_points(f.cloud, k, seed * 7919 + static_cast<std::uint64_t>(f.frame_id)),
                                 nn::to_params(label)});
  }
  if (out.empty()) throw DataError("no usable GPEN training frames");
  return out;
}

nn::GpenTrainResult train_gpen_from_config(const RunConfig& cfg, std::ostream& warn) {
  const auto frames = load_frames(cfg, cfg.gpen.train_frames, cfg.seed + 1, warn);
  const auto samples = gpen_samples(frames, cfg.gpen.train.points_per_frame, cfg.seed + 1);
  nn::GpenTrainConfig tc = cfg.gpen.train;
  tc.adam = cfg.adam;
  tc.weights = cfg.pipeline.weights;
  tc.shuffle_seed = cfg.seed;
  return nn::train_gpen(nn::GpenModel::create(cfg.gpen.spec), samples, tc);
}

PointCloud read_input_cloud(const CommandArgs& args) {
  const fs::path p(args.input);
  if (p.extension() == ".bin") {
    const RigidTransform tf = args.calib.empty() ? kitti_axis_swap() : read_kitti_calib(args.calib).velo_to_cam;
    return transform(read_velodyne_bin(args.input), tf);
  }
  return read_text_cloud(args.input);
}

// The command's cloud: the given input, or the first synthetic frame.
PointCloud command_cloud(const RunConfig& cfg, const CommandArgs& args) {
  if (!args.input.empty()) return read_input_cloud(args);
  std::ostringstream ignore;
  return load_frames(cfg, 1, cfg.seed, ignore).front().cloud;
}

Plane command_plane(const RunConfig& cfg, const CommandArgs& args, const PointCloud& cloud) {
  if (args.plane) {
    const auto& p = *args.plane;
    return Plane::from_coefficients(p[0], p[1], p[2], p[3]);
  }
  switch (cfg.pipeline.plane_method) {
    case FitMethod::Naive: return fit_naive();
    case FitMethod::LeastSquares: return fit_least_squares(cloud);
    case FitMethod::PCA: return fit_pca(cloud);
    case FitMethod::RANSAC: {
      RansacConfig rc = cfg.ransac;
      rc.rng_seed = cfg.seed;
      return fit_ransac(cloud, rc).plane;
    }
    default: throw ConfigError("pipeline.plane_method gpen is not available here");
  }
}

json plane_json(const Plane& p) {
  return json::array({p.normal().x(), p.normal().y(), p.normal().z(), p.offset()});
}

}  // namespace

std::vector<DatasetFrame> load_frames(const RunConfig& cfg, std::size_t n, std::uint64_t seed, std::ostream& warn,
                                      std::size_t* skipped) {
  if (n == 0) throw DataError("dataset is empty (0 frames requested)");
  auto frames = cfg.dataset.source == "kitti" ? kitti_frames(cfg, n, warn, skipped) : synthetic_frames(cfg, n, seed);
  if (frames.empty()) throw DataError("dataset is empty");
  return frames;
}

std::string cmd_bench_planes(const RunConfig& cfg, std::ostream& warn) {
  std::size_t skipped = 0;
  const auto frames = load_frames(cfg, cfg.dataset.n_frames, cfg.seed, warn, &skipped);
  const nn::GpenModel gpen = cfg.gpen.checkpoint.empty() ? train_gpen_from_config(cfg, warn).model
                                                         : nn::load_gpen(cfg.gpen.checkpoint);
  std::vector<Plane> truth;
  for (const auto& f : frames) truth.push_back(f.plane_truth);

  const FitMethod methods[] = {FitMethod::Naive, FitMethod::LeastSquares, FitMethod::PCA, FitMethod::RANSAC,
                               FitMethod::GPEN};
  const std::vector<std::string> header{"method", "rmse_angle_deg", "rmse_height_m", "fps", "failed"};
  std::vector<std::vector<std::string>> rows;
  for (FitMethod m : methods) {
    std::vector<Plane> preds(frames.size());
    std::vector<char> failed(frames.size(), 0);
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(frames.size(), cfg.workers, [&](std::size_t i) {
      const PointCloud& c = frames[i].cloud;
      try {
        switch (m) {
          case FitMethod::Naive: preds[i] = fit_naive(); break;
          case FitMethod::LeastSquares: preds[i] = fit_least_squares(c); break;
          case FitMethod::PCA: preds[i] = fit_pca(c); break;
          case FitMethod::RANSAC: {
            RansacConfig rc = cfg.ransac;
            rc.rng_seed = cfg.seed * 1000003 + static_cast<std::uint64_t>(frames[i].frame_id);
            preds[i] = fit_ransac(c, rc).plane;
            break;
          }
          case FitMethod::GPEN:
            preds[i] = nn::predict_plane(gpen, c, cfg.gpen.eval_points, static_cast<std::uint64_t>(frames[i].frame_id));
            break;
        }
      } catch (const DegenerateGeometry&) {
        preds[i] = fit_naive();
        failed[i] = 1;
      } catch (const std::invalid_argument&) {
        preds[i] = fit_naive();
        failed[i] = 1;
      }
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string fps = (m == FitMethod::Naive || cfg.deterministic || secs <= 0.0)
                                ? "--"
                                : fmt("%.1f", static_cast<double>(frames.size()) / secs);
    const auto n_failed = static_cast<double>(std::count(failed.begin(), failed.end(), 1));
    rows.push_back({std::string(to_string(m)), fmt("%.6f", rmse_angle(preds, truth)), fmt("%.6f", rmse_height(preds, truth)),
                    fps, fmt("%.0f", n_failed)});
  }
  write_table(cfg, "bench_planes", header, rows);
  if (skipped > 0) warn << "warning: " << skipped << " frame(s) skipped\n";
  return csv(header, rows);
}

std::string cmd_train_gpen(const RunConfig& cfg, std::ostream& warn) {
  const auto result = train_gpen_from_config(cfg, warn);
  nn::save_gpen(result.model, out_path(cfg, "gpen_checkpoint.json"));
  write_text_file(out_path(cfg, "gpen_history.csv"), nn::history_csv(result.history));
  json hist = json::array();
  for (const auto& h : result.history) hist.push_back({{"epoch", h.epoch}, {"step", h.step}, {"loss", h.loss}, {"lr", h.lr}});
  write_json(out_path(cfg, "gpen_history.json"), {{"initial_loss", result.initial_loss}, {"history", hist}});
  std::string s = "trained GPEN for " + std::to_string(result.history.size()) + " epoch(s); initial loss " +
                  fmt("%.6f", result.initial_loss);
  if (!result.history.empty()) s += ", final loss " + fmt("%.6f", result.history.back().loss);
  return s + "\n";
}

std::string cmd_rasterize(const RunConfig& cfg, const CommandArgs& args) {
  const PointCloud cloud = command_cloud(cfg, args);
  const Plane plane = command_plane(cfg, args, cloud);
  const BevMaps maps = rasterize(cloud, plane, cfg.bev);
  const json extra{{"cell", cfg.bev.cell}, {"x_min", cfg.bev.x_min}, {"z_min", cfg.bev.z_min}, {"plane", plane_json(plane)}};
  write_grid(out_path(cfg, "bev_density"), maps.density, extra);
  write_grid(out_path(cfg, "bev_heights"), maps.heights, extra);
  std::vector<std::vector<std::string>> rows;
  const auto summarize = [&](const std::string& name, const FeatureGrid& g, std::size_t ch) {
    std::size_t nonzero = 0;
    double mx = 0.0;
    for (std::size_t r = 0; r < g.height(); ++r) {
      for (std::size_t c = 0; c < g.width(); ++c) {
        const double v = g.at(r, c, ch);
        if (v != 0.0) ++nonzero;
        mx = std::max(mx, v);
      }
    }
    rows.push_back({name, std::to_string(nonzero), fmt("%.6f", mx)});
  };
  summarize("density", maps.density, 0);
  for (std::size_t s = 0; s < maps.heights.channels(); ++s) summarize("height_" + std::to_string(s), maps.heights, s);
  const std::vector<std::string> header{"map", "nonzero_cells", "max"};
  write_table(cfg, "bev_summary", header, rows);
  return csv(header, rows);
}

std::string cmd_gen_anchors(const RunConfig& cfg, const CommandArgs& args) {
  Plane plane = fit_naive();
  if (args.plane) {
    plane = command_plane(cfg, args, {});
  } else if (!args.input.empty()) {
    plane = command_plane(cfg, args, read_input_cloud(args));
  }
  const AnchorGrid grid = gen_anchors(plane, cfg.anchors);
  std::vector<double> flat;
  std::ostringstream table;
  table << "x,y,z,length,width,height,yaw\n";
  char buf[200];
  for (const auto& a : grid.anchors) {
    flat.insert(flat.end(), {a.center.x(), a.center.y(), a.center.z(), a.length, a.width, a.height, a.yaw});
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.4f,%.4f,%.4f,%.6f\n", a.center.x(), a.center.y(), a.center.z(),
                  a.length, a.width, a.height, a.yaw);
    table << buf;
  }
  write_text_file(out_path(cfg, "anchors.csv"), table.str());
  write_tensor(out_path(cfg, "anchors"), {grid.anchors.size(), 7}, flat,
               {{"columns", {"x", "y", "z", "length", "width", "height", "yaw"}}, {"plane", plane_json(plane)}});
  const std::vector<std::string> header{"anchors", "lattice_x", "lattice_z", "sizes", "orientations"};
  const std::vector<std::vector<std::string>> rows{{std::to_string(grid.anchors.size()), std::to_string(cfg.anchors.lattice_x()),
                                                    std::to_string(cfg.anchors.lattice_z()),
                                                    std::to_string(cfg.anchors.sizes.size()),
                                                    std::to_string(cfg.anchors.orientations.size())}};
  write_table(cfg, "anchors_summary", header, rows);
  return csv(header, rows);
}

std::string cmd_eval(const RunConfig& cfg, std::ostream& warn) {
  if (cfg.data_dir.empty() || cfg.eval.detections_dir.empty()) {
    throw ConfigError("eval needs paths.data_dir and eval.detections_dir");
  }
  const fs::path labels = fs::path(cfg.data_dir) / "label_2";
  if (!fs::is_directory(labels)) throw DataError("no label_2 directory under " + cfg.data_dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(labels)) {
    if (e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no label files under " + labels.string());
  std::vector<FrameData> frames;
  std::size_t skipped = 0;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    try {
      FrameData fd;
      fd.frame_id = std::stoi(stem);
      for (const auto& l : read_kitti_labels(f.string())) {
        if (l.type != cfg.eval.class_name) continue;
        fd.gts.push_back(label_to_box(l));
        fd.meta.push_back(label_meta(l));
      }
      const fs::path det = fs::path(cfg.eval.detections_dir) / (stem + ".txt");
      if (fs::exists(det)) {
        for (const auto& l : read_kitti_labels(det.string())) {
          if (l.type != cfg.eval.class_name) continue;
          fd.dets.push_back(Detection{label_to_box(l), l.score.value_or(1.0), fd.frame_id});
        }
      }
      frames.push_back(std::move(fd));
    } catch (const std::exception& e) {
      warn << "warning: skipping frame " << stem << ": " << e.what() << '\n';
      ++skipped;
    }
  }
  if (frames.empty()) throw DataError("no readable frames to evaluate");
  std::optional<Difficulty> diff;
  if (cfg.eval.difficulty == "easy") diff = Difficulty::Easy;
  if (cfg.eval.difficulty == "moderate") diff = Difficulty::Moderate;
  if (cfg.eval.difficulty == "hard") diff = Difficulty::Hard;
  const EvalSummary s = evaluate(frames, cfg.eval.iou_kind, cfg.eval.iou_threshold, cfg.eval.interpolation, diff);
  write_text_file(out_path(cfg, "eval_pr.csv"), pr_csv(s.curve));
  json j = summary_json(s);
  j["skipped_frames"] = skipped;
  write_json(out_path(cfg, "eval_summary.json"), j);
  const std::vector<std::string> header{"iou", "threshold", "difficulty", "ap", "ahs", "n_gt", "n_det", "tp"};
  const std::vector<std::vector<std::string>> rows{
      {cfg.eval.iou_kind == IouKind::ThreeD ? "3d" : "bev", fmt("%.2f", cfg.eval.iou_threshold), cfg.eval.difficulty,
       fmt("%.6f", s.ap), fmt("%.6f", s.ahs), std::to_string(s.n_gt), std::to_string(s.n_det), std::to_string(s.tp)}};
  write_text_file(out_path(cfg, "eval_summary.csv"), csv(header, rows));
  return csv(header, rows);
}

std::string cmd_pipeline_demo(const RunConfig& cfg) {
  const PipelineConfig pc = demo_pipeline_config(cfg);
  const auto make = [&](std::size_t n, std::uint64_t seed) {
    const auto specs = random_specs(n, seed, cfg.demo.scene, cfg.demo.max_tilt_deg);
    std::vector<Scene> scenes(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) { scenes[i] = generate(specs[i]); });
    return scenes;
  };
  const auto train = make(cfg.demo.train_frames, cfg.seed + 2);
  const auto eval = make(cfg.demo.eval_frames, cfg.seed + 3);
  const DemoResult r = run_pipeline_demo(pc, train, eval, cfg.demo.heading_noise_deg);

  const std::vector<std::string> header{"setting", "ap", "ahs", "n_gt", "n_det", "tp"};
  std::vector<std::vector<std::string>> rows;
  const auto add = [&](const std::string& name, const EvalSummary& s) {
    rows.push_back({name, fmt("%.6f", s.ap), fmt("%.6f", s.ahs), std::to_string(s.n_gt), std::to_string(s.n_det),
                    std::to_string(s.tp)});
  };
  add("3d@0.7", r.ap_3d);
  add("bev@0.7", r.ap_bev);
  add("3d@0.7+heading_noise", r.noisy_3d);
  write_table(cfg, "demo_metrics", header, rows);
  write_text_file(out_path(cfg, "demo_pr_3d.csv"), pr_csv(r.ap_3d.curve));

  std::ostringstream dets;
  dets << "frame,x,y,z,length,width,height,yaw,score\n";
  char buf[256];
  for (const auto& f : r.frames) {
    for (const auto& d : f.dets) {
      std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", f.frame_id, d.box.center.x(),
                    d.box.center.y(), d.box.center.z(), d.box.length, d.box.width, d.box.height, d.box.yaw, d.score);
      dets << buf;
    }
  }
  write_text_file(out_path(cfg, "demo_detections.csv"), dets.str());
  write_json(out_path(cfg, "demo_log.json"), {{"rpn_loss", r.log.rpn_loss},
                                              {"refine_loss", r.log.refine_loss},
                                              {"proposals", r.stats.proposals},
                                              {"dropped_degenerate", r.stats.dropped_degenerate},
                                              {"nms_threshold", pc.nms_thresh}});
  return csv(header, rows);
}

std::string cmd_make_scenes(const RunConfig& cfg) {
  const std::size_t n = cfg.dataset.n_frames;
  if (n == 0) throw DataError("dataset is empty (0 frames requested)");
  const auto specs = random_specs(n, cfg.seed, cfg.dataset.scene, cfg.dataset.max_tilt_deg);
  std::vector<std::vector<std::string>> rows(n);
  fs::create_directories(cfg.output_dir);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const Scene s = generate(specs[i]);
    export_kitti(s, cfg.output_dir, static_cast<int>(i));
    const Plane& p = s.plane_truth;
    rows[i] = {frame_name(static_cast<int>(i)), fmt("%.9f", p.normal().x()), fmt("%.9f", p.normal().y()),
               fmt("%.9f", p.normal().z()), fmt("%.9f", p.offset()), std::to_string(s.cloud.size()),
               std::to_string(s.gts.size())};
  });
  const std::vector<std::string> header{"frame", "a", "b", "c", "d", "n_points", "n_boxes"};
  write_table(cfg, "scenes", header, rows);
  return "wrote " + std::to_string(n) + " scene(s) to " + cfg.output_dir + "\n";
}

std::string cmd_cluster_sizes(const RunConfig& cfg, std::ostream& warn) {
  const auto frames = load_frames(cfg, cfg.dataset.n_frames, cfg.seed, warn);
  std::vector<Box3D> boxes;
  for (const auto& f : frames) boxes.insert(boxes.end(), f.gts.begin(), f.gts.end());
  if (boxes.empty()) throw DataError("no labelled boxes to cluster");
  const auto sizes = cluster_sizes(boxes, cfg.cluster.k, cfg.seed, cfg.cluster.iterations);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    rows.push_back({std::to_string(i), fmt("%.4f", sizes[i].length), fmt("%.4f", sizes[i].width), fmt("%.4f", sizes[i].height)});
  }
  const std::vector<std::string> header{"cluster", "length", "width", "height"};
  write_table(cfg, "cluster_sizes", header, rows);
  return csv(header, rows);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return 1;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  return 3;
}

}  // namespace pcfuse
