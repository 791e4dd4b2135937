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

#include "pcfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pcfuse/errors.hpp"
#include "pcfuse/iou.hpp"
#include "pcfuse/parallel.hpp"

namespace pcfuse {

using nn::Mat;
using nn::Var;

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  const std::string prefix = std::string("stage '") + name + "': ";
  try {
    return f();
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DegenerateGeometry& e) {
    throw DegenerateGeometry(prefix + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(prefix + e.what());
  }
}

GridRect bev_rect(const Box3D& b, const BevConfig& cfg) {
  double x0 = 1e300, x1 = -1e300, z0 = 1e300, z1 = -1e300;
  for (const auto& q : bev_footprint(b)) {
    x0 = std::min(x0, q.x());
    x1 = std::max(x1, q.x());
    z0 = std::min(z0, q.y());
    z1 = std::max(z1, q.y());
  }
  const double rows = static_cast<double>(cfg.rows());
  const double cols = static_cast<double>(cfg.cols());
  return GridRect{std::clamp((x0 - cfg.x_min) / cfg.cell, 0.0, rows), std::clamp((z0 - cfg.z_min) / cfg.cell, 0.0, cols),
                  std::clamp((x1 - cfg.x_min) / cfg.cell, 0.0, rows), std::clamp((z1 - cfg.z_min) / cfg.cell, 0.0, cols)};
}

double best_aa_iou(const Box3D& p, std::span<const Box3D> gts, int* arg) {
  double best = 0.0;
  *arg = -1;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const double v = iou_bev(p, axis_aligned_box(gts[g]));
    if (v > best) {
      best = v;
      *arg = static_cast<int>(g);
    }
  }
  return best;
}

Mat softmax_positive(const Mat& logits) {
  Mat p(logits.rows(), 1);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = std::max(logits(r, 0), logits(r, 1));
    const double e0 = std::exp(logits(r, 0) - m);
    const double e1 = std::exp(logits(r, 1) - m);
    p(r, 0) = e1 / (e0 + e1);
  }
  return p;
}

void require_finite_loss(double v, long step, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + " training diverged at step " + std::to_string(step));
}

}  // namespace

void PipelineConfig::validate() const {
  bev.validate();
  anchors.validate();
  ransac.validate();
  adam.validate();
  if (plane_method == FitMethod::GPEN) throw std::invalid_argument("the pipeline plane fitter cannot be GPEN");
  if (!(rpn_iou.negative <= rpn_iou.positive) || !(refine_iou.negative <= refine_iou.positive)) {
    throw std::invalid_argument("IoU thresholds must satisfy negative <= positive");
  }
  if (proposals_train == 0 || proposals_eval == 0 || rpn_crop == 0 || rpn_batch == 0 || refine_batch == 0) {
    throw std::invalid_argument("proposal caps, crop and batch sizes must be positive");
  }
  if (!synth.oracle || synth.channels < 14 || synth.channels % 4 != 0) {
    throw std::invalid_argument("pipeline features need oracle channels and C >= 14 divisible by 4");
  }
  if (rpn_mlp.layer_widths.empty() || rpn_mlp.layer_widths.back() != 8) throw std::invalid_argument("RPN MLP must end in 8 outputs");
  if (head_mlp.layer_widths.empty() || head_mlp.layer_widths.back() != 14) {
    throw std::invalid_argument("refinement head must end in 14 outputs");
  }
  if (rpn_epochs < 0 || refine_epochs < 0) throw std::invalid_argument("epoch counts must be nonnegative");
}

DetectorModel DetectorModel::create(const PipelineConfig& cfg) {
  DetectorModel m;
  const std::size_t rpn_in = static_cast<std::size_t>(1 + cfg.bev.n_slices) * cfg.rpn_crop * cfg.rpn_crop + 2;
  m.rpn = nn::Mlp(rpn_in, cfg.rpn_mlp);
  m.aw = AdaptiveWeighting(cfg.synth.grid_size, cfg.synth.channels, cfg.aw_mlp, cfg.seed + 17);
  m.aw.zero_output_layer();
  m.head = nn::Mlp(cfg.synth.grid_size * cfg.synth.grid_size * cfg.synth.channels, cfg.head_mlp);
  return m;
}

FeatureGrid stack_bev(const BevMaps& maps) {
  const std::size_t h = maps.density.height();
  const std::size_t w = maps.density.width();
  const std::size_t n = maps.heights.channels();
  FeatureGrid out(h, w, 1 + n);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      out.at(r, c, 0) = maps.density.at(r, c, 0);
      for (std::size_t s = 0; s < n; ++s) out.at(r, c, 1 + s) = maps.heights.at(r, c, s);
    }
  }
  return out;
}

Mat rpn_features(const FeatureGrid& bev, const BevConfig& cfg, std::span<const Box3D> anchors, std::size_t crop) {
  const std::size_t per = bev.channels() * crop * crop;
  Mat out = Mat::Zero(idx(anchors.size()), idx(per + 2));
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const GridRect r = bev_rect(anchors[a], cfg);
    if (r.rows() > 0.0 && r.cols() > 0.0) {
      const FeatureGrid g = crop_resize(bev, r, crop, crop);
      std::copy(g.data().begin(), g.data().end(), out.row(idx(a)).data());
    }
    const Vec3 e = axis_aligned_extents(anchors[a]);
    out(idx(a), idx(per)) = e.x();
    out(idx(a), idx(per + 1)) = e.z();
  }
  return out;
}

FrameStage prepare_frame(const Scene& scene, const PipelineConfig& cfg) {
  FrameStage f;
  f.cloud = stage("fov filter", [&] { return filter_fov(scene.cloud, scene.cam); });
  f.plane = stage("plane fit", [&] {
    switch (cfg.plane_method) {
      case FitMethod::Naive: return fit_naive();
      case FitMethod::LeastSquares: return fit_least_squares(f.cloud);
      case FitMethod::PCA: return fit_pca(f.cloud);
      default: return fit_ransac(f.cloud, cfg.ransac).plane;
    }
  });
  f.bev = stage("rasterize", [&] { return stack_bev(rasterize(f.cloud, f.plane, cfg.bev)); });
  f.anchors = stage("anchors", [&] {
    const AnchorGrid grid = gen_anchors(f.plane, cfg.anchors);
    // Integral image of occupied cells; anchors over empty ground are skipped.
    const std::size_t rows = f.bev.height();
    const std::size_t cols = f.bev.width();
    std::vector<double> integral((rows + 1) * (cols + 1), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        integral[(r + 1) * (cols + 1) + c + 1] = (f.bev.at(r, c, 0) > 0.0 ? 1.0 : 0.0) + integral[r * (cols + 1) + c + 1] +
                                                 integral[(r + 1) * (cols + 1) + c] - integral[r * (cols + 1) + c];
      }
    }
    std::vector<Box3D> kept;
    for (const auto& a : grid.anchors) {
      const GridRect rect = bev_rect(a, cfg.bev);
      const auto r0 = static_cast<std::size_t>(std::floor(rect.row0));
      const auto c0 = static_cast<std::size_t>(std::floor(rect.col0));
      const auto r1 = std::min(rows, static_cast<std::size_t>(std::ceil(rect.row1)));
      const auto c1 = std::min(cols, static_cast<std::size_t>(std::ceil(rect.col1)));
      if (r1 <= r0 || c1 <= c0) continue;
      const double occupied = integral[r1 * (cols + 1) + c1] - integral[r0 * (cols + 1) + c1] -
                              integral[r1 * (cols + 1) + c0] + integral[r0 * (cols + 1) + c0];
      if (occupied > 0.0) kept.push_back(a);
    }
    return kept;
  });
  return f;
}

std::vector<Proposal> propose(const DetectorModel& m, const FrameStage& f, const PipelineConfig& cfg, std::size_t cap) {
  return stage("proposals", [&] {
    std::vector<Proposal> out;
    if (f.anchors.empty()) return out;
    const Mat feats = rpn_features(f.bev, cfg.bev, f.anchors, cfg.rpn_crop);
    const Mat raw = m.rpn.forward(nn::constant(feats)).value();
    if (!raw.allFinite()) throw NumericalError("proposal head produced NaN");
    const Mat score = softmax_positive(raw.leftCols(2));
    std::vector<std::size_t> order(f.anchors.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score(idx(a), 0) > score(idx(b), 0); });
    if (order.size() > cfg.rpn_pre_nms) order.resize(cfg.rpn_pre_nms);
    std::vector<ScoredBox> cands;
    for (std::size_t a : order) {
      RpnDelta d;
      for (int k = 0; k < 6; ++k) d[static_cast<std::size_t>(k)] = raw(idx(a), 2 + k);
      cands.push_back(ScoredBox{decode_rpn(f.anchors[a], d, cfg.rpn_encoding), score(idx(a), 0)});
    }
    for (std::size_t k : nms(cands, cfg.rpn_nms)) {
      if (out.size() >= cap) break;
      out.push_back(Proposal{cands[k].box, cands[k].score});
    }
    return out;
  });
}

RefineInput refine_input(const Scene& scene, const Box3D& proposal, const PipelineConfig& cfg) {
  const SynthFeatures sf = synth_features(scene, proposal, cfg.synth);
  RefineInput in;
  in.proposal = proposal;
  in.f_il = grid_to_mat(sf.f_il);
  in.f_bl = grid_to_mat(sf.f_bl);
  const auto pl = max_pool_points(sf.points, cfg.literal_point_max);
  in.f_pl = Mat(1, idx(pl.size()));
  std::copy(pl.begin(), pl.end(), in.f_pl.data());
  in.azimuth = azimuth(proposal);
  return in;
}

RefineGraph refine_forward(const DetectorModel& m, std::span<const RefineInput> inputs, const PipelineConfig& cfg) {
  if (inputs.empty()) throw std::invalid_argument("refine_forward needs at least one proposal");
  const std::size_t s = cfg.synth.grid_size;
  const std::size_t c = cfg.synth.channels;
  std::vector<Var> rows;
  rows.reserve(inputs.size());
  for (const auto& in : inputs) {
    const AwOutput aw = m.aw.forward(nn::constant(in.f_il), nn::constant(in.f_bl),
                                     nn::constant(Mat(Eigen::Map<const Mat>(in.f_pl.data(), idx(s * s), idx(c)))));
    rows.push_back(spatial_fuse(aw.img, aw.bev, nn::reshape(aw.pt, 1, idx(s * s * c)), s, in.azimuth));
  }
  const Var out = m.head.forward(nn::concat_rows(rows));
  return RefineGraph{nn::slice_cols(out, 0, 2), nn::slice_cols(out, 2, 10), nn::slice_cols(out, 12, 2)};
}

namespace {

struct RpnBatch {
  Mat features;
  std::vector<int> labels;
  std::vector<Eigen::Index> positives;
  Mat targets;  // one row per positive
};

struct RefineBatch {
  std::vector<RefineInput> inputs;
  std::vector<int> labels;
  std::vector<Eigen::Index> positives;
  Mat corner_targets;
  Mat angle_targets;
};

RpnBatch make_rpn_batch(const Scene& scene, const FrameStage& f, const PipelineConfig& cfg, std::mt19937_64& rng) {
  std::vector<Box3D> aa;
  for (const auto& g : scene.gts) aa.push_back(axis_aligned_box(g));
  const RpnTargets t = assign_rpn_targets(f.anchors, aa, cfg.rpn_iou, cfg.rpn_encoding);
  std::vector<std::size_t> pos, neg;
  for (std::size_t a = 0; a < t.labels.size(); ++a) {
    if (t.labels[a] == AnchorLabel::Positive) pos.push_back(a);
    if (t.labels[a] == AnchorLabel::Negative) neg.push_back(a);
  }
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  pos.resize(std::min(pos.size(), cfg.rpn_batch / 2));
  neg.resize(std::min(neg.size(), cfg.rpn_batch - pos.size()));
  std::vector<Box3D> picked;
  RpnBatch b;
  for (std::size_t a : pos) {
    b.positives.push_back(idx(picked.size()));
    picked.push_back(f.anchors[a]);
    b.labels.push_back(1);
  }
  for (std::size_t a : neg) {
    picked.push_back(f.anchors[a]);
    b.labels.push_back(0);
  }
  b.features = rpn_features(f.bev, cfg.bev, picked, cfg.rpn_crop);
  b.targets = Mat(idx(pos.size()), 6);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    for (int k = 0; k < 6; ++k) b.targets(idx(i), k) = t.reg_targets[pos[i]][static_cast<std::size_t>(k)];
  }
  return b;
}

RefineBatch make_refine_batch(const Scene& scene, const std::vector<Proposal>& props, const PipelineConfig& cfg,
                              std::mt19937_64& rng) {
  std::vector<Box3D> boxes;
  for (const auto& p : props) boxes.push_back(p.box);
  // Ground-truth boxes and jittered copies guarantee positives.
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (const auto& g : scene.gts) {
    const Box3D aa = axis_aligned_box(g);
    boxes.push_back(aa);
    for (int k = 0; k < 4; ++k) {
      Box3D j = aa;
      j.center.x() += 0.2 * jitter(rng);
      j.center.z() += 0.2 * jitter(rng);
      j.width *= std::exp(0.08 * jitter(rng));
      j.length *= std::exp(0.08 * jitter(rng));
      boxes.push_back(j);
    }
  }
  std::vector<std::size_t> pos, neg;
  std::vector<int> match(boxes.size(), -1);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].center.x() == 0.0 && boxes[i].center.z() == 0.0) continue;
    const double v = best_aa_iou(boxes[i], scene.gts, &match[i]);
    if (v >= cfg.refine_iou.positive) pos.push_back(i);
    else if (v < cfg.refine_iou.negative) neg.push_back(i);
  }
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  pos.resize(std::min(pos.size(), cfg.refine_batch / 2));
  neg.resize(std::min(neg.size(), cfg.refine_batch - pos.size()));
  RefineBatch b;
  b.corner_targets = Mat(idx(pos.size()), 10);
  b.angle_targets = Mat(idx(pos.size()), 2);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const Box3D& p = boxes[pos[i]];
    b.positives.push_back(idx(b.inputs.size()));
    b.inputs.push_back(refine_input(scene, p, cfg));
    b.labels.push_back(1);
    const RefinementTarget t = encode_refinement(p, scene.gts[static_cast<std::size_t>(match[pos[i]])]);
    for (int k = 0; k < 10; ++k) b.corner_targets(idx(i), k) = t[static_cast<std::size_t>(k)];
    b.angle_targets(idx(i), 0) = t[10];
    b.angle_targets(idx(i), 1) = t[11];
  }
  for (std::size_t i : neg) {
    b.inputs.push_back(refine_input(scene, boxes[i], cfg));
    b.labels.push_back(0);
  }
  return b;
}

std::vector<Var> concat_params(std::vector<Var> a, const std::vector<Var>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TrainLog train_detector(DetectorModel& m, std::span<const Scene> scenes, const PipelineConfig& cfg) {
  cfg.validate();
  if (scenes.empty()) throw std::invalid_argument("no training scenes");
  TrainLog log;
  std::mt19937_64 rng(cfg.seed);

  std::vector<FrameStage> frames(scenes.size());
  parallel_for(scenes.size(), cfg.workers, [&](std::size_t i) { frames[i] = prepare_frame(scenes[i], cfg); });

  stage("proposal training", [&] {
    std::vector<RpnBatch> batches;
    for (std::size_t i = 0; i < scenes.size(); ++i) batches.push_back(make_rpn_batch(scenes[i], frames[i], cfg, rng));
    nn::Adam opt(m.rpn.parameters(), cfg.adam);
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.rpn_epochs; ++epoch) {
      opt.set_schedule_position(epoch);
      std::shuffle(order.begin(), order.end(), rng);
      double sum = 0.0;
      for (std::size_t i : order) {
        const RpnBatch& b = batches[i];
        if (b.labels.empty()) continue;
        opt.zero_grad();
        const Var out = m.rpn.forward(nn::constant(b.features));
        const Var reg = nn::select_rows(nn::slice_cols(out, 2, 6), b.positives);
        const Var loss = nn::rpn_loss(nn::slice_cols(out, 0, 2), b.labels, reg, b.targets, cfg.weights);
        require_finite_loss(loss.scalar(), opt.steps() + 1, "proposal");
        sum += loss.scalar();
        nn::backward(loss);
        opt.step();
      }
      log.rpn_loss.push_back(sum / static_cast<double>(batches.size()));
    }
    return 0;
  });

  stage("refinement training", [&] {
    std::vector<std::vector<Proposal>> props(scenes.size());
    parallel_for(scenes.size(), cfg.workers,
                 [&](std::size_t i) { props[i] = propose(m, frames[i], cfg, cfg.proposals_train); });
    std::vector<RefineBatch> batches;
    for (std::size_t i = 0; i < scenes.size(); ++i) batches.push_back(make_refine_batch(scenes[i], props[i], cfg, rng));
    nn::Adam opt(concat_params(m.aw.parameters(), m.head.parameters()), cfg.adam);
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.refine_epochs; ++epoch) {
      opt.set_schedule_position(epoch);
      std::shuffle(order.begin(), order.end(), rng);
      double sum = 0.0;
      for (std::size_t i : order) {
        const RefineBatch& b = batches[i];
        if (b.inputs.empty()) continue;
        opt.zero_grad();
        const RefineGraph g = refine_forward(m, b.inputs, cfg);
        const Var loss = nn::refinement_loss(g.logits, b.labels, nn::select_rows(g.corners, b.positives), b.corner_targets,
                                             nn::select_rows(g.angle, b.positives), b.angle_targets, cfg.weights);
        require_finite_loss(loss.scalar(), opt.steps() + 1, "refinement");
        sum += loss.scalar();
        nn::backward(loss);
        opt.step();
      }
      log.refine_loss.push_back(sum / static_cast<double>(batches.size()));
    }
    return 0;
  });
  return log;
}

std::vector<Detection> detect(const DetectorModel& m, const Scene& scene, const PipelineConfig& cfg, int frame_id,
                              DetectStats* stats) {
  const FrameStage f = prepare_frame(scene, cfg);
  const auto props = propose(m, f, cfg, cfg.proposals_eval);
  std::vector<Detection> out;
  if (stats) stats->proposals += props.size();
  if (props.empty()) return out;
  return stage("refinement", [&] {
    std::vector<RefineInput> inputs;
    for (const auto& p : props) {
      if (p.box.center.x() == 0.0 && p.box.center.z() == 0.0) continue;
      inputs.push_back(refine_input(scene, p.box, cfg));
    }
    std::vector<ScoredBox> cands;
    if (inputs.empty()) return out;
    const RefineGraph g = refine_forward(m, inputs, cfg);
    const Mat score = softmax_positive(g.logits.value());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const double sc = score(idx(i), 0);
      if (!std::isfinite(sc)) throw NumericalError("refinement score is NaN");
      if (sc < cfg.score_threshold) continue;
      double t[12];
      for (int k = 0; k < 10; ++k) t[k] = g.corners.value()(idx(i), k);
      t[10] = g.angle.value()(idx(i), 0);
      t[11] = g.angle.value()(idx(i), 1);
      try {
        cands.push_back(ScoredBox{decode_refinement(inputs[i].proposal, t), sc});
      } catch (const DegenerateGeometry&) {
        if (stats) ++stats->dropped_degenerate;
      } catch (const std::invalid_argument&) {
        if (stats) ++stats->dropped_degenerate;
      }
    }
    for (std::size_t k : nms(cands, cfg.nms_thresh)) out.push_back(Detection{cands[k].box, cands[k].score, frame_id});
    return out;
  });
}

DemoResult run_pipeline_demo(const PipelineConfig& cfg, std::span<const Scene> train, std::span<const Scene> eval,
                             double heading_noise_deg) {
  cfg.validate();
  DemoResult r;
  DetectorModel m = DetectorModel::create(cfg);
  r.log = train_detector(m, train, cfg);
  r.frames.resize(eval.size());
  std::vector<DetectStats> stats(eval.size());
  parallel_for(eval.size(), cfg.workers, [&](std::size_t i) {
    r.frames[i].frame_id = static_cast<int>(i);
    r.frames[i].gts = eval[i].gts;
    r.frames[i].dets = detect(m, eval[i], cfg, static_cast<int>(i), &stats[i]);
  });
  for (const auto& s : stats) {
    r.stats.proposals += s.proposals;
    r.stats.dropped_degenerate += s.dropped_degenerate;
  }
  r.ap_3d = evaluate(r.frames, IouKind::ThreeD, 0.7);
  r.ap_bev = evaluate(r.frames, IouKind::Bev, 0.7);

  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  std::normal_distribution<double> noise(0.0, heading_noise_deg * std::numbers::pi / 180.0);
  std::vector<FrameData> noisy = r.frames;
  for (auto& f : noisy) {
    for (auto& d : f.dets) d.box.yaw = normalize_angle(d.box.yaw + noise(rng));
  }
  r.noisy_3d = evaluate(noisy, IouKind::ThreeD, 0.7);
  return r;
}

}  // namespace pcfuse
