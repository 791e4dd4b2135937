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

#include "pcfuse/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "pcfuse/errors.hpp"

namespace pcfuse {

using nlohmann::json;

namespace {

// Reads or writes the same field list so the schema lives in one place.
class Binder {
 public:
  Binder(json* node, bool reading) : node_(node), reading_(reading) {}

  template <typename T>
  void operator()(const char* key, T& value) {
    if (reading_) {
      value = node_->at(key).get<T>();
    } else {
      (*node_)[key] = value;
    }
  }

  template <typename E, std::size_t N>
  void choice(const char* key, E& value, const std::pair<E, const char*> (&names)[N]) {
    if (reading_) {
      const auto s = node_->at(key).get<std::string>();
      for (const auto& [e, name] : names) {
        if (s == name) {
          value = e;
          return;
        }
      }
      std::string allowed;
      for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.second;
      throw ConfigError(std::string("bad value '") + s + "' for " + key + " (expected " + allowed + ")");
    }
    for (const auto& [e, name] : names) {
      if (e == value) (*node_)[key] = name;
    }
  }

  Binder sub(const char* key) {
    if (!reading_ && !node_->contains(key)) (*node_)[key] = json::object();
    return Binder(&(*node_)[key], reading_);
  }

  [[nodiscard]] bool reading() const { return reading_; }
  json& node() { return *node_; }

 private:
  json* node_;
  bool reading_;
};

constexpr std::pair<FitMethod, const char*> kFit[] = {
    {FitMethod::Naive, "naive"}, {FitMethod::LeastSquares, "ls"}, {FitMethod::PCA, "pca"},
    {FitMethod::RANSAC, "ransac"}, {FitMethod::GPEN, "gpen"}};
constexpr std::pair<SizeEncoding, const char*> kEnc[] = {{SizeEncoding::Raw, "raw"}, {SizeEncoding::Log, "log"}};
constexpr std::pair<IouKind, const char*> kIou[] = {{IouKind::ThreeD, "3d"}, {IouKind::Bev, "bev"}};
constexpr std::pair<Interpolation, const char*> kInterp[] = {{Interpolation::Eleven, "11"}, {Interpolation::Forty, "40"}};
constexpr std::pair<nn::Activation, const char*> kAct[] = {{nn::Activation::ReLU, "relu"}, {nn::Activation::None, "none"}};

void bind(Binder b, nn::MlpSpec& s) {
  b("widths", s.layer_widths);
  b.choice("activation", s.activation, kAct);
  b("activate_output", s.activate_output);
  b("seed", s.rng_seed);
}

void bind(Binder b, SceneSpec& s) {
  b("tilt_x_deg", s.tilt_x_deg);
  b("tilt_z_deg", s.tilt_z_deg);
  b("height", s.height);
  b("n_boxes", s.n_boxes);
  b("clutter_fraction", s.clutter_fraction);
  b("points_per_m2", s.points_per_m2);
  b("sensor_noise_sigma", s.sensor_noise_sigma);
  b("x_min", s.x_min);
  b("x_max", s.x_max);
  b("z_min", s.z_min);
  b("z_max", s.z_max);
}

void bind_sizes(Binder b, const char* key, std::vector<SizePrior>& sizes) {
  if (b.reading()) {
    sizes.clear();
    for (const auto& v : b.node().at(key)) {
      const auto t = v.get<std::vector<double>>();
      if (t.size() != 3) throw ConfigError(std::string(key) + " entries must be [length, width, height]");
      sizes.push_back(SizePrior{t[0], t[1], t[2]});
    }
    return;
  }
  json arr = json::array();
  for (const auto& s : sizes) arr.push_back({s.length, s.width, s.height});
  b.node()[key] = arr;
}

void bind(Binder b, RunConfig& c) {
  {
    Binder p = b.sub("paths");
    p("data_dir", c.data_dir);
    p("output_dir", c.output_dir);
  }
  {
    Binder d = b.sub("dataset");
    d("source", c.dataset.source);
    d("n_frames", c.dataset.n_frames);
    d("max_tilt_deg", c.dataset.max_tilt_deg);
    bind(d.sub("scene"), c.dataset.scene);
  }
  {
    Binder v = b.sub("bev");
    v("x_min", c.bev.x_min);
    v("x_max", c.bev.x_max);
    v("z_min", c.bev.z_min);
    v("z_max", c.bev.z_max);
    v("cell", c.bev.cell);
    v("band_lo", c.bev.band_lo);
    v("band_hi", c.bev.band_hi);
    v("n_slices", c.bev.n_slices);
    v("density_log_base", c.bev.density_log_base);
    v("absolute_heights", c.bev.absolute_heights);
  }
  {
    Binder r = b.sub("ransac");
    r("iterations", c.ransac.iterations);
    r("inlier_threshold", c.ransac.inlier_threshold);
    r("min_inlier_fraction", c.ransac.min_inlier_fraction);
  }
  {
    Binder a = b.sub("adam");
    a("lr", c.adam.lr);
    a("beta1", c.adam.beta1);
    a("beta2", c.adam.beta2);
    a("eps", c.adam.eps);
    a("decay_every", c.adam.decay_every);
    a("decay_rate", c.adam.decay_rate);
  }
  {
    Binder a = b.sub("anchors");
    a("stride", c.anchors.stride);
    bind_sizes(a, "sizes", c.anchors.sizes);
    a("orientations", c.anchors.orientations);
    a("x_min", c.anchors.x_min);
    a("x_max", c.anchors.x_max);
    a("z_min", c.anchors.z_min);
    a("z_max", c.anchors.z_max);
    a.choice("size_encoding", c.pipeline.rpn_encoding, kEnc);
  }
  {
    Binder f = b.sub("fusion");
    f("grid_size", c.pipeline.synth.grid_size);
    f("channels", c.pipeline.synth.channels);
    f("oracle_features", c.pipeline.synth.oracle);
    f("stripe_period", c.pipeline.synth.stripe_period);
    f("point_pool", c.pipeline.synth.point_pool);
    f("literal_point_max", c.pipeline.literal_point_max);
    bind(f.sub("aw_mlp"), c.pipeline.aw_mlp);
    bind(f.sub("head_mlp"), c.pipeline.head_mlp);
    bind(f.sub("rpn_mlp"), c.pipeline.rpn_mlp);
    f("rpn_crop", c.pipeline.rpn_crop);
  }
  {
    Binder l = b.sub("losses");
    l("alpha_v", c.pipeline.weights.alpha_v);
    l("alpha_d", c.pipeline.weights.alpha_d);
    l("beta_c", c.pipeline.weights.beta_c);
    l("beta_r", c.pipeline.weights.beta_r);
    l("gamma_c", c.pipeline.weights.gamma_c);
    l("gamma_r", c.pipeline.weights.gamma_r);
    l("gamma_a", c.pipeline.weights.gamma_a);
  }
  {
    Binder t = b.sub("thresholds");
    t("nms", c.pipeline.nms_thresh);
    t("rpn_nms", c.pipeline.rpn_nms);
    t("rpn_positive", c.pipeline.rpn_iou.positive);
    t("rpn_negative", c.pipeline.rpn_iou.negative);
    t("refine_positive", c.pipeline.refine_iou.positive);
    t("refine_negative", c.pipeline.refine_iou.negative);
    t("score", c.pipeline.score_threshold);
  }
  {
    Binder p = b.sub("pipeline");
    p.choice("plane_method", c.pipeline.plane_method, kFit);
    p("proposals_train", c.pipeline.proposals_train);
    p("proposals_eval", c.pipeline.proposals_eval);
    p("rpn_pre_nms", c.pipeline.rpn_pre_nms);
    p("rpn_batch", c.pipeline.rpn_batch);
    p("refine_batch", c.pipeline.refine_batch);
    p("rpn_epochs", c.pipeline.rpn_epochs);
    p("refine_epochs", c.pipeline.refine_epochs);
  }
  {
    Binder g = b.sub("gpen");
    bind(g.sub("point_encoder"), c.gpen.spec.point_encoder);
    bind(g.sub("head"), c.gpen.spec.head);
    g("input_scale", c.gpen.spec.input_scale);
    g("epochs", c.gpen.train.epochs);
    g("batch_size", c.gpen.train.batch_size);
    g("points_per_frame", c.gpen.train.points_per_frame);
    g("train_frames", c.gpen.train_frames);
    g("eval_points", c.gpen.eval_points);
    g("checkpoint", c.gpen.checkpoint);
  }
  {
    Binder e = b.sub("eval");
    e.choice("iou_kind", c.eval.iou_kind, kIou);
    e("iou_threshold", c.eval.iou_threshold);
    e.choice("interpolation", c.eval.interpolation, kInterp);
    e("difficulty", c.eval.difficulty);
    e("detections_dir", c.eval.detections_dir);
    e("class_name", c.eval.class_name);
  }
  {
    Binder d = b.sub("demo");
    d("train_frames", c.demo.train_frames);
    d("eval_frames", c.demo.eval_frames);
    d("heading_noise_deg", c.demo.heading_noise_deg);
    d("max_tilt_deg", c.demo.max_tilt_deg);
    bind(d.sub("scene"), c.demo.scene);
    d("x_min", c.demo.x_min);
    d("x_max", c.demo.x_max);
    d("z_min", c.demo.z_min);
    d("z_max", c.demo.z_max);
    bind_sizes(d, "size_priors", c.demo.size_priors);
  }
  {
    Binder k = b.sub("cluster");
    k("k", c.cluster.k);
    k("iterations", c.cluster.iterations);
  }
  b("deterministic", c.deterministic);
  b("workers", c.workers);
  b("seed", c.seed);
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return !(a.is_number_integer() && b.is_number_float());
  return a.type() == b.type();
}

// Overlays `patch` onto `base` in place, rejecting unknown keys and kind changes.
void strict_merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + here + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      strict_merge(slot, value, here);
    } else if (!same_kind(slot, value)) {
      throw ConfigError("config key '" + here + "' expects " + std::string(slot.type_name()) + ", got " +
                        value.type_name());
    } else {
      slot = value;
    }
  }
}

void apply_override(json& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not key=value");
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (parts.back().empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const auto wrap = [&](json leaf) {
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) leaf = json{{*it, std::move(leaf)}};
    return leaf;
  };
  // A string key given something that parses as JSON (e.g. a numeric path)
  // keeps the raw text.
  json trial = root;
  try {
    strict_merge(trial, wrap(value), "");
  } catch (const ConfigError&) {
    if (value.is_string()) throw;
    trial = root;
    try {
      strict_merge(trial, wrap(json(raw)), "");
    } catch (const ConfigError&) {
      trial = root;
      strict_merge(trial, wrap(value), "");
    }
  }
  root = std::move(trial);
}

}  // namespace

void RunConfig::validate() const {
  try {
    bev.validate();
    ransac.validate();
    adam.validate();
    anchors.validate();
    dataset.scene.validate();
    demo.scene.validate();
    demo_pipeline_config(*this).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (dataset.source != "synthetic" && dataset.source != "kitti") {
    throw ConfigError("dataset.source must be synthetic or kitti");
  }
  if (dataset.source == "kitti" && data_dir.empty()) throw ConfigError("dataset.source=kitti needs paths.data_dir");
  if (dataset.max_tilt_deg < 0.0 || dataset.max_tilt_deg >= 45.0) throw ConfigError("dataset.max_tilt_deg must be in [0, 45)");
  if (gpen.train.epochs < 0 || gpen.train.batch_size < 1 || gpen.eval_points == 0 || gpen.train.points_per_frame == 0) {
    throw ConfigError("gpen epochs, batch size and point counts must be positive");
  }
  if (!(eval.iou_threshold > 0.0 && eval.iou_threshold <= 1.0)) throw ConfigError("eval.iou_threshold must be in (0, 1]");
  const std::vector<std::string> buckets{"all", "easy", "moderate", "hard"};
  if (std::find(buckets.begin(), buckets.end(), eval.difficulty) == buckets.end()) {
    throw ConfigError("eval.difficulty must be all, easy, moderate or hard");
  }
  if (demo.train_frames == 0 || demo.eval_frames == 0) throw ConfigError("demo frame counts must be positive");
  if (cluster.k == 0 || cluster.iterations < 1) throw ConfigError("cluster.k and cluster.iterations must be positive");
  if (workers == 0) throw ConfigError("workers must be at least 1");
}

nlohmann::json to_json(const RunConfig& cfg) {
  json j = json::object();
  RunConfig copy = cfg;
  bind(Binder(&j, false), copy);
  return j;
}

RunConfig from_json(const nlohmann::json& j) {
  json merged = to_json(RunConfig{});
  strict_merge(merged, j, "");
  RunConfig cfg;
  try {
    bind(Binder(&merged, true), cfg);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json root = to_json(RunConfig{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    try {
      strict_merge(root, json::parse(in, nullptr, true, true), "");
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(root, o);
  RunConfig cfg = from_json(root);
  cfg.validate();
  namespace fs = std::filesystem;
  if (!cfg.data_dir.empty() && !fs::is_directory(cfg.data_dir)) {
    throw ConfigError("paths.data_dir '" + cfg.data_dir + "' does not exist");
  }
  if (!cfg.eval.detections_dir.empty() && !fs::is_directory(cfg.eval.detections_dir)) {
    throw ConfigError("eval.detections_dir '" + cfg.eval.detections_dir + "' does not exist");
  }
  if (!cfg.gpen.checkpoint.empty() && !fs::is_regular_file(cfg.gpen.checkpoint)) {
    throw ConfigError("gpen.checkpoint '" + cfg.gpen.checkpoint + "' does not exist");
  }
  return cfg;
}

PipelineConfig demo_pipeline_config(const RunConfig& cfg) {
  PipelineConfig p = cfg.pipeline;
  p.bev = cfg.bev;
  p.anchors = cfg.anchors;
  p.ransac = cfg.ransac;
  p.ransac.rng_seed = cfg.seed;
  p.adam = cfg.adam;
  p.seed = cfg.seed;
  p.synth.seed = cfg.seed;
  p.workers = cfg.workers;
  p.bev.x_min = p.anchors.x_min = cfg.demo.x_min;
  p.bev.x_max = p.anchors.x_max = cfg.demo.x_max;
  p.bev.z_min = p.anchors.z_min = cfg.demo.z_min;
  p.bev.z_max = p.anchors.z_max = cfg.demo.z_max;
  p.anchors.sizes = cfg.demo.size_priors;
  return p;
}

}  // namespace pcfuse
