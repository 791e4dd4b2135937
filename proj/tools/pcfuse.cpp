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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcfuse/commands.hpp"
#include "pcfuse/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pcfuse: ground planes, BEV maps, anchors, fusion and detection metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t workers = 0;
  bool print_config = false;
  pcfuse::CommandArgs args;
  std::vector<double> plane;

  app.add_option("-c,--config", config_path, "JSON config file");
  app.add_option("-s,--set", overrides, "override as dot.path=value (repeatable)");
  app.add_option("-j,--workers", workers, "worker threads (overrides the config)");
  app.add_flag("--print-config", print_config, "print the resolved config as JSON before running");

  auto* bench = app.add_subcommand("bench-planes", "compare the five plane fitters on a dataset");
  auto* train = app.add_subcommand("train-gpen", "train the plane estimation network");
  auto* raster = app.add_subcommand("rasterize", "write BEV density and height maps");
  auto* anchors = app.add_subcommand("gen-anchors", "write plane-anchored anchor boxes");
  auto* eval = app.add_subcommand("eval", "AP/AHS of KITTI-format detections");
  auto* demo = app.add_subcommand("pipeline-demo", "train and evaluate the detector on synthetic scenes");
  auto* scenes = app.add_subcommand("make-scenes", "export synthetic scenes in the KITTI layout");
  auto* cluster = app.add_subcommand("cluster-sizes", "k-means anchor size priors from labels");
  for (auto* sub : {raster, anchors}) {
    sub->add_option("-i,--input", args.input, "point cloud: velodyne .bin or text xyz");
    sub->add_option("--calib", args.calib, "KITTI calib file for a .bin input");
    sub->add_option("--plane", plane, "plane a b c d instead of fitting")->expected(4);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (workers > 0) overrides.push_back("workers=" + std::to_string(workers));
    const pcfuse::RunConfig cfg = pcfuse::load_config(config_path, overrides);
    if (print_config) std::cout << pcfuse::to_json(cfg).dump(2) << '\n';
    if (plane.size() == 4) args.plane = std::array<double, 4>{plane[0], plane[1], plane[2], plane[3]};

    std::string out;
    if (bench->parsed()) out = pcfuse::cmd_bench_planes(cfg, std::cerr);
    if (train->parsed()) out = pcfuse::cmd_train_gpen(cfg, std::cerr);
    if (raster->parsed()) out = pcfuse::cmd_rasterize(cfg, args);
    if (anchors->parsed()) out = pcfuse::cmd_gen_anchors(cfg, args);
    if (eval->parsed()) out = pcfuse::cmd_eval(cfg, std::cerr);
    if (demo->parsed()) out = pcfuse::cmd_pipeline_demo(cfg);
    if (scenes->parsed()) out = pcfuse::cmd_make_scenes(cfg);
    if (cluster->parsed()) out = pcfuse::cmd_cluster_sizes(cfg, std::cerr);
    std::cout << out;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pcfuse::exit_code_for(e);
  }
  return 0;
}
