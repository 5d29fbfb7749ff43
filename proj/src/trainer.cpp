// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/trainer.hpp"

#include "dynsplat/checkpoint.hpp"
#include "dynsplat/raw_io.hpp"
#include "dynsplat/rasterizer.hpp"
#include "dynsplat/sceneflow.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace dynsplat {

using nlohmann::json;

void TrainConfig::validate() const {
  if (iters_total < 0 || iters_static_warmup < 0 || iters_rigid_warmup < 0)
    throw ValidationError("iteration counts must be non-negative");
  if (iters_static_warmup + iters_rigid_warmup > iters_total)
    throw ValidationError("warm-up iterations exceed iters_total");
  if (!(transition_threshold > 0.0) || transition_check_every < 1 || K < 1 || !(alpha_gate > 0.0))
    throw ValidationError("transition_threshold, transition_check_every, K and alpha_gate must be positive");
  const LearningRates &r = learning_rates;
  for (double v : {r.mean, r.scale, r.quat, r.opacity, r.color, r.beta, r.gamma, r.weights, r.basis, r.position_scale})
    if (!(v > 0.0))
      throw ValidationError("learning rates must be positive");
  if (checkpoint_every < 0 || track_window < 1 || threads < 0)
    throw ValidationError("checkpoint_every, track_window and threads out of range");
}

namespace {

template <typename T>
void read_into(const json &j, const char *key, T &out) {
  if (j.contains(key))
    out = j.at(key).get<T>();
}

void reject_unknown(const json &j, std::initializer_list<const char *> keys, const std::string &where) {
  for (const auto &[k, v] : j.items()) {
    (void)v;
    if (std::none_of(keys.begin(), keys.end(), [&](const char *s) { return k == s; }))
      throw ValidationError("unknown key '" + k + "' in " + where);
  }
}

} // namespace

TrainConfig parse_train_config(const std::string &json_text) {
  TrainConfig c;
  try {
    const json j = json::parse(json_text);
    reject_unknown(j,
                   {"iters_total", "iters_static_warmup", "iters_rigid_warmup", "transition_threshold",
                    "transition_check_every", "learning_rates", "K", "alpha_gate", "loss_weights", "seed",
                    "checkpoint_every", "track_window", "static_init", "threads"},
                   "train config");
    read_into(j, "iters_total", c.iters_total);
    read_into(j, "iters_static_warmup", c.iters_static_warmup);
    read_into(j, "iters_rigid_warmup", c.iters_rigid_warmup);
    read_into(j, "transition_threshold", c.transition_threshold);
    read_into(j, "transition_check_every", c.transition_check_every);
    read_into(j, "K", c.K);
    read_into(j, "alpha_gate", c.alpha_gate);
    read_into(j, "seed", c.seed);
    read_into(j, "checkpoint_every", c.checkpoint_every);
    read_into(j, "track_window", c.track_window);
    read_into(j, "threads", c.threads);
    if (j.contains("learning_rates")) {
      const json &r = j.at("learning_rates");
      reject_unknown(r,
                     {"mean", "scale", "quat", "opacity", "color", "beta", "gamma", "weights", "basis", "velocity",
                      "position_scale"},
                     "learning_rates");
      LearningRates &lr = c.learning_rates;
      read_into(r, "mean", lr.mean);
      read_into(r, "scale", lr.scale);
      read_into(r, "quat", lr.quat);
      read_into(r, "opacity", lr.opacity);
      read_into(r, "color", lr.color);
      read_into(r, "beta", lr.beta);
      read_into(r, "gamma", lr.gamma);
      read_into(r, "weights", lr.weights);
      read_into(r, "basis", lr.basis);
      read_into(r, "velocity", lr.velocity);
      read_into(r, "position_scale", lr.position_scale);
    }
    if (j.contains("loss_weights")) {
      const json &w = j.at("loss_weights");
      reject_unknown(w,
                     {"lambda_ssim", "lambda_alpha", "lambda_depth", "lambda_normal", "lambda_track", "lambda_flow",
                      "lambda_beta", "lambda_s"},
                     "loss_weights");
      LossWeights &lw = c.loss_weights;
      read_into(w, "lambda_ssim", lw.lambda_ssim);
      read_into(w, "lambda_alpha", lw.lambda_alpha);
      read_into(w, "lambda_depth", lw.lambda_depth);
      read_into(w, "lambda_normal", lw.lambda_normal);
      read_into(w, "lambda_track", lw.lambda_track);
      read_into(w, "lambda_flow", lw.lambda_flow);
      read_into(w, "lambda_beta", lw.lambda_beta);
      read_into(w, "lambda_s", lw.lambda_s);
    }
    if (j.contains("static_init")) {
      const json &s = j.at("static_init");
      reject_unknown(s, {"frames_sampled", "stride"}, "static_init");
      read_into(s, "frames_sampled", c.static_init.frames_sampled);
      read_into(s, "stride", c.static_init.stride);
    }
  } catch (const json::exception &e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path &file) {
  if (!std::filesystem::exists(file))
    throw MissingChannel(file.string());
  return parse_train_config(io::read_file(file));
}

std::string train_config_to_json(const TrainConfig &c) {
  const LearningRates &lr = c.learning_rates;
  const LossWeights &w = c.loss_weights;
  json j = {{"iters_total", c.iters_total},
            {"iters_static_warmup", c.iters_static_warmup},
            {"iters_rigid_warmup", c.iters_rigid_warmup},
            {"transition_threshold", c.transition_threshold},
            {"transition_check_every", c.transition_check_every},
            {"learning_rates",
             {{"mean", lr.mean},
              {"scale", lr.scale},
              {"quat", lr.quat},
              {"opacity", lr.opacity},
              {"color", lr.color},
              {"beta", lr.beta},
              {"gamma", lr.gamma},
              {"weights", lr.weights},
              {"basis", lr.basis},
              {"velocity", lr.velocity},
              {"position_scale", lr.position_scale}}},
            {"K", c.K},
            {"alpha_gate", c.alpha_gate},
            {"loss_weights",
             {{"lambda_ssim", w.lambda_ssim},
              {"lambda_alpha", w.lambda_alpha},
              {"lambda_depth", w.lambda_depth},
              {"lambda_normal", w.lambda_normal},
              {"lambda_track", w.lambda_track},
              {"lambda_flow", w.lambda_flow},
              {"lambda_beta", w.lambda_beta},
              {"lambda_s", w.lambda_s}}},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every},
            {"track_window", c.track_window},
            {"static_init", {{"frames_sampled", c.static_init.frames_sampled}, {"stride", c.static_init.stride}}},
            {"threads", c.threads}};
  return j.dump(2);
}

std::vector<Mask> training_dynamic_masks(const SceneDataset &ds, std::uint64_t seed) {
  if (!ds.dyn_masks.empty())
    return ds.dyn_masks;
  DynMaskOptions opt;
  opt.seed = seed;
  const MotionScoreTable table = compute_motion_scores(ds.flow_fwd, ds.flow_bwd, ds.uncertainty, ds.objects, opt);
  return compose_dynamic_masks(table, ds.objects);
}

ImageD normals_from_depth(const ImageD &depth, const ObjectIds &objects, const CameraFrame &cam, Mask &valid) {
  const int w = depth.width, h = depth.height;
  const ImageD pts = unproject_all(depth, cam);
  ImageD n(w, h, 3);
  valid = Mask(w, h, 1);
  auto point = [&](int x, int y) { return Vec3(pts.at(x, y, 0), pts.at(x, y, 1), pts.at(x, y, 2)); };
  auto usable = [&](int x, int y, int id) {
    return x >= 0 && y >= 0 && x < w && y < h && depth_is_valid(depth.at(x, y)) && objects.at(x, y) == id;
  };
  const Vec3 eye = cam.center();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int id = objects.at(x, y);
      if (!usable(x, y, id) || !usable(x - 1, y, id) || !usable(x + 1, y, id) || !usable(x, y - 1, id) ||
          !usable(x, y + 1, id))
        continue;
      Vec3 v = (point(x + 1, y) - point(x - 1, y)).cross(point(x, y + 1) - point(x, y - 1));
      const double len = v.norm();
      if (!(len > 0.0))
        continue;
      v /= len;
      if (v.dot(eye - point(x, y)) < 0.0)
        v = -v;
      for (int c = 0; c < 3; ++c)
        n.at(x, y, c) = v[c];
      valid.at(x, y) = 1;
    }
  return n;
}

namespace {

struct FrameSupervision {
  Mask dyn;
  Mask static_region; ///< outside the 1-px dilated dynamic mask
  Mask depth_valid;
  ImageD normals;
  Mask normal_valid;
  ImageD flow_fwd, flow_bwd; ///< 3D scene flow targets
  Mask flow_mask_fwd, flow_mask_bwd;
};

Mask invert(const Mask &m) {
  Mask out(m.width, m.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    out.data[i] = !m.data[i];
  return out;
}

Mask both(const Mask &a, const Mask &b) {
  Mask out(a.width, a.height, 1);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    out.data[i] = a.data[i] && b.data[i];
  return out;
}

std::vector<FrameSupervision> prepare_supervision(const SceneDataset &ds, const std::vector<Mask> &dyn) {
  const int nf = ds.num_frames(), w = ds.width(), h = ds.height();
  std::vector<FrameSupervision> out(nf);
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < nf; ++t) {
    FrameSupervision &s = out[t];
    s.dyn = dyn[t];
    s.static_region = invert(dilate(dyn[t], 1));
    s.depth_valid = depth_valid_mask(ds.depth[t]);
    s.normals = normals_from_depth(ds.depth[t], ds.objects[t], ds.cameras[t], s.normal_valid);
    s.flow_fwd = ImageD(w, h, 3);
    s.flow_bwd = ImageD(w, h, 3);
    s.flow_mask_fwd = Mask(w, h, 1);
    s.flow_mask_bwd = Mask(w, h, 1);
    if (t + 1 < nf) {
      const SceneFlowResult r =
          forward_scene_flow(ds.depth[t], ds.depth[t + 1], ds.flow_fwd[t], ds.cameras[t], ds.cameras[t + 1]);
      s.flow_fwd = r.flow;
      s.flow_mask_fwd = scene_flow_mask(dyn[t], s.depth_valid, r.warped_valid,
                                        invert(occlusion_mask(ds.flow_fwd[t], ds.flow_bwd[t + 1])));
    }
    if (t > 0) {
      const SceneFlowResult r =
          backward_scene_flow(ds.depth[t], ds.depth[t - 1], ds.flow_bwd[t], ds.cameras[t], ds.cameras[t - 1]);
      s.flow_bwd = r.flow;
      s.flow_mask_bwd = scene_flow_mask(dyn[t], s.depth_valid, r.warped_valid,
                                        invert(occlusion_mask(ds.flow_bwd[t], ds.flow_fwd[t - 1])));
    }
  }
  return out;
}

std::vector<TrackSample> track_samples(const SceneDataset &ds, int t, int tc) {
  std::vector<TrackSample> out;
  const TrackSet &tr = ds.tracks;
  for (int i = 0; i < tr.n; ++i) {
    if (!tr.visible(i, t) || !tr.visible(i, tc))
      continue;
    const int x = static_cast<int>(std::lround(tr.u(i, t))), y = static_cast<int>(std::lround(tr.v(i, t)));
    const int xc = static_cast<int>(std::lround(tr.u(i, tc))), yc = static_cast<int>(std::lround(tr.v(i, tc)));
    if (x < 0 || y < 0 || x >= ds.width() || y >= ds.height() || xc < 0 || yc < 0 || xc >= ds.width() ||
        yc >= ds.height())
      continue;
    const double d = ds.depth[tc].at(xc, yc);
    if (!depth_is_valid(d))
      continue;
    out.push_back({x, y, unproject(Vec2(tr.u(i, tc), tr.v(i, tc)), d, ds.cameras[tc])});
  }
  return out;
}

Mask alpha_above(const ImageD &alpha, double thr) {
  Mask m(alpha.width, alpha.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = alpha.data[i] > thr;
  return m;
}

/// Adds `scale * g` into channels [first, first + g.channels) of the render adjoint.
void add_channels(RenderGrads &rg, int first, const ImageD &g, double scale) {
  for (std::size_t p = 0; p < g.pixel_count(); ++p)
    for (int c = 0; c < g.channels; ++c)
      rg.channels.data[p * channel::kCount + first + c] += scale * g.data[p * g.channels + c];
}

struct IterationLoss {
  LossReport report;
  RenderGrads grads;
};

IterationLoss compute_losses(const RenderOutputs &r, const SceneDataset &ds, const FrameSupervision &sup, int t,
                             int tc, int stage, const LossWeights &lw) {
  const int w = ds.width(), h = ds.height();
  IterationLoss out{{}, RenderGrads(w, h)};
  LossReport &rep = out.report;
  RenderGrads &rg = out.grads;
  const bool statics_only = stage == 1;
  const Mask *region = statics_only ? &sup.static_region : nullptr;

  const ImageD color = r.color();
  PhotometricLoss ph = statics_only ? photometric_loss(color, ds.images[t], ImageD(), Mask(), lw, region)
                                    : photometric_loss(color, ds.images[t], r.dyn_mask(), sup.dyn, lw, region);
  rep.add("photo", ph.l1, 1.0 - lw.lambda_ssim);
  rep.add("ssim", ph.dssim, lw.lambda_ssim);
  add_channels(rg, channel::kColor, ph.grad_color, 1.0);
  if (!statics_only) {
    rep.add("mask", ph.bce, lw.lambda_alpha);
    add_channels(rg, channel::kDynMask, ph.grad_mask, 1.0);
  }

  // Depth: alpha-normalized rendered depth against the observed depth.
  const Mask covered = alpha_above(r.alpha, 0.5);
  Mask depth_valid = both(sup.depth_valid, covered);
  if (region)
    depth_valid = both(depth_valid, *region);
  ImageD pred_depth(w, h, 1);
  for (std::size_t p = 0; p < pred_depth.data.size(); ++p)
    if (depth_valid.data[p])
      pred_depth.data[p] = r.channels.data[p * channel::kCount + channel::kDepth] / r.alpha.data[p];
  const ImageLoss dl = depth_loss(pred_depth, ds.depth[t], depth_valid);
  rep.add("depth", dl.value, lw.lambda_depth);
  for (std::size_t p = 0; p < pred_depth.data.size(); ++p) {
    if (!depth_valid.data[p] || dl.grad.data[p] == 0.0)
      continue;
    const double g = lw.lambda_depth * dl.grad.data[p];
    rg.channels.data[p * channel::kCount + channel::kDepth] += g / r.alpha.data[p];
    rg.alpha.data[p] -= g * pred_depth.data[p] / r.alpha.data[p];
  }

  Mask normal_valid = both(sup.normal_valid, covered);
  if (region)
    normal_valid = both(normal_valid, *region);
  const ImageLoss nl = normal_loss(r.normal(), sup.normals, normal_valid);
  rep.add("normal", nl.value, lw.lambda_normal);
  add_channels(rg, channel::kNormal, nl.grad, lw.lambda_normal);

  if (statics_only)
    return out;

  if (tc != t) {
    const std::vector<TrackSample> samples = track_samples(ds, t, tc);
    const ImageLoss tl = track_loss(r.correspondence(), samples, r.alpha);
    rep.add("track", tl.value, lw.lambda_track);
    add_channels(rg, channel::kCorr, tl.grad, lw.lambda_track);
  } else {
    rep.add("track", 0.0, lw.lambda_track);
  }

  const FlowLoss fl = flow_loss(r.velocity_fwd(), r.velocity_bwd(), sup.flow_fwd, sup.flow_bwd,
                                both(sup.flow_mask_fwd, covered), both(sup.flow_mask_bwd, covered));
  rep.add("flow", fl.value, lw.lambda_flow);
  add_channels(rg, channel::kVelFwd, fl.grad_fwd, lw.lambda_flow);
  add_channels(rg, channel::kVelBwd, fl.grad_bwd, lw.lambda_flow);
  return out;
}

GaussianSet statics_view(const GaussianSet &set) {
  GaussianSet v;
  v.statics = set.statics;
  v.bases = MotionBases(0, set.num_frames());
  v.alpha_gate = set.alpha_gate;
  return v;
}

} // namespace

TrainResult train(const SceneDataset &ds, const TrainConfig &config, const TrainOptions &options) {
  config.validate();
  ds.validate();
  const int nf = ds.num_frames();
  if (nf < 1)
    throw ShapeMismatch("train: empty dataset");
  if (config.threads > 0)
    omp_set_num_threads(config.threads);

  const std::vector<Mask> dyn = training_dynamic_masks(ds, config.seed);
  const std::vector<FrameSupervision> sup = prepare_supervision(ds, dyn);

  TrainResult res;
  GaussianSet &set = res.set;
  bool dynamic_initialized = false;
  if (options.initial) {
    set = *options.initial;
    if (set.num_frames() != nf)
      throw ShapeMismatch("train: initial set frame count differs from the dataset");
    dynamic_initialized = true;
  } else {
    StaticInitOptions so = config.static_init;
    so.seed = config.seed;
    set.statics = init_static(ds, dyn, so);
    set.bases = MotionBases(0, nf);
    set.alpha_gate = config.alpha_gate;
  }
  set.validate();

  std::ofstream log_file;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir / "checkpoints");
    log_file.open(*options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log_file)
      throw Error("cannot open training log in " + options.out_dir->string());
  }
  auto emit = [&](const json &j) {
    res.log.push_back(j.dump());
    if (log_file)
      log_file << res.log.back() << '\n';
  };

  auto initialize_dynamic = [&](int iteration) {
    dynamic_initialized = true;
    std::size_t candidates = 0;
    const std::vector<LiftedTrack> lifted = lift_tracks(ds.tracks, ds.depth, ds.cameras);
    for (int i = 0; i < ds.tracks.n; ++i) {
      if (lifted[i].first < 0)
        continue;
      int inside = 0, seen = 0;
      for (int f = 0; f < nf; ++f)
        if (lifted[i].visible[f]) {
          ++seen;
          inside += dyn[f].at(static_cast<int>(std::lround(ds.tracks.u(i, f))),
                              static_cast<int>(std::lround(ds.tracks.v(i, f)))) != 0;
        }
      candidates += 2 * inside > seen;
    }
    const int k = static_cast<int>(std::min<std::size_t>(config.K, candidates));
    if (k > 0) {
      RigidInit ri = init_rigid_from_tracks(ds, dyn, k, config.seed);
      set.rigids = std::move(ri.gaussians);
      set.bases = std::move(ri.bases);
    }
    for (const auto &g : set.rigids)
      res.initial_rigid_origin.push_back(g.origin);
    res.initial_rigid_converted.assign(set.rigids.size(), false);
    emit({{"event", "init_dynamic"}, {"iter", iteration}, {"K", k}, {"rigid", set.rigids.size()}});
  };
  // Position of each current rigid Gaussian in the initial rigid list.
  std::vector<std::size_t> rigid_source;
  auto reset_rigid_source = [&] {
    rigid_source.resize(set.rigids.size());
    for (std::size_t i = 0; i < rigid_source.size(); ++i)
      rigid_source[i] = i;
  };
  if (options.initial) {
    for (const auto &g : set.rigids)
      res.initial_rigid_origin.push_back(g.origin);
    res.initial_rigid_converted.assign(set.rigids.size(), false);
    reset_rigid_source();
  }

  AdamOptimizer opt;
  opt.sync(set);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> frame_dist(0, nf - 1);
  std::uniform_int_distribution<int> offset_dist(-config.track_window, config.track_window);
  const int s1 = config.iters_static_warmup, s12 = config.iters_static_warmup + config.iters_rigid_warmup;
  int nonfinite_run = 0;

  auto counts = [&] {
    return json{{"static", set.statics.size()}, {"rigid", set.rigids.size()}, {"transient", set.transients.size()}};
  };

  for (int it = 0; it < config.iters_total; ++it) {
    const int stage = it < s1 ? 1 : (it < s12 ? 2 : 3);
    if (stage >= 2 && !dynamic_initialized) {
      initialize_dynamic(it);
      reset_rigid_source();
      opt.sync(set);
    }
    if (stage == 3 && (it - s12) % config.transition_check_every == 0) {
      const std::size_t before = set.rigids.size() + set.transients.size();
      const TransitionResult tr = transition_rigid_to_transient(set, config.transition_threshold);
      opt.on_transition(tr.migrated, set);
      for (std::size_t m : tr.migrated)
        if (rigid_source[m] < res.initial_rigid_converted.size())
          res.initial_rigid_converted[rigid_source[m]] = true;
      std::vector<std::size_t> kept;
      for (std::size_t i = 0, next = 0; i < rigid_source.size(); ++i) {
        if (next < tr.migrated.size() && tr.migrated[next] == i) {
          ++next;
          continue;
        }
        kept.push_back(rigid_source[i]);
      }
      rigid_source = std::move(kept);
      if (set.rigids.size() + set.transients.size() != before)
        throw Error("transition changed the dynamic population size");
      res.transitions.push_back({it, tr.count, set.rigids.size(), set.transients.size()});
      emit({{"event", "transition"}, {"iter", it}, {"converted", tr.count}, {"counts", counts()}});
    }

    const int t = frame_dist(rng);
    const int tc = std::clamp(t + offset_dist(rng), 0, nf - 1);

    GaussianSet view;
    const GaussianSet *render_set = &set;
    if (stage == 1) {
      view = statics_view(set);
      render_set = &view;
    }
    const std::vector<Splat> splats = prepare_splats(*render_set, ds.cameras[t], t, tc);
    const RenderOutputs r = rasterize_forward(splats, ds.cameras[t]);
    IterationLoss loss = compute_losses(r, ds, sup[t], t, tc, stage, config.loss_weights);

    RegGrad reg;
    if (stage >= 2) {
      const double rv = reg_loss(set, config.loss_weights, &reg);
      loss.report.add("reg", rv, 1.0);
    }
    const double total = loss.report.total;
    res.totals.push_back(total);

    json entry = {{"iter", it}, {"stage", stage}, {"frame", t}, {"frame_corr", tc}, {"total", total}};
    entry["terms"] = loss.report.terms;
    entry["counts"] = counts();

    GradientBuffers grads = GradientBuffers::zeros_like(set);
    bool ok = std::isfinite(total);
    if (ok) {
      GradientBuffers g = rasterize_backward(splats, ds.cameras[t], r, loss.grads, *render_set, t, tc);
      if (stage == 1) {
        grads.statics = std::move(g.statics);
      } else {
        grads = std::move(g);
        for (std::size_t i = 0; i < set.rigids.size(); ++i) {
          grads.rigids[i].beta += reg.rigid_beta[i];
          grads.rigids[i].log_scale += reg.rigid_log_scale[i];
        }
        for (std::size_t i = 0; i < set.transients.size(); ++i)
          grads.transients[i].log_scale += reg.transient_log_scale[i];
      }
      ok = grads.all_finite();
    }
    if (!ok) {
      entry["skipped"] = true;
      emit(entry);
      if (++nonfinite_run >= 100)
        throw Error("training aborted: 100 consecutive non-finite iterations");
      continue;
    }
    nonfinite_run = 0;

    ActiveGroups active;
    active.statics = true;
    active.rigids = stage >= 2;
    active.bases = stage >= 2;
    active.transients = stage >= 3;
    opt.step(set, grads, config.learning_rates, active);
    emit(entry);

    if (options.out_dir && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "iter_%06d.ckpt", it + 1);
      save_checkpoint(*options.out_dir / "checkpoints" / name, set);
    }
  }

  res.nonfinite_skips = opt.nonfinite_skips();
  res.rejected_basis_steps = opt.rejected_basis_steps();
  emit({{"event", "done"},
        {"iters", config.iters_total},
        {"counts", counts()},
        {"nonfinite_skips", res.nonfinite_skips},
        {"rejected_basis_steps", res.rejected_basis_steps}});
  if (options.out_dir)
    save_checkpoint(*options.out_dir / "final.ckpt", set);
  return res;
}

std::size_t DurationHistogram::total() const {
  std::size_t s = 0;
  for (std::size_t c : counts)
    s += c;
  return s;
}

std::string DurationHistogram::to_json() const {
  json edges = json::array();
  const int bins = static_cast<int>(counts.size());
  for (int b = 0; b <= bins; ++b)
    edges.push_back(lo + (hi - lo) * b / bins);
  return json{{"bins", bins}, {"range", {lo, hi}}, {"edges", edges}, {"counts", counts}, {"total", total()}}.dump(2);
}

DurationHistogram duration_histogram(const GaussianSet &set, int bins) {
  if (bins < 2)
    throw ValidationError("duration_histogram: bins must be >= 2");
  DurationHistogram h;
  h.lo = 0.0;
  h.hi = std::max(1, set.num_frames());
  h.counts.assign(bins, 0);
  auto add = [&](double beta) {
    const int b = static_cast<int>(std::floor((beta - h.lo) / (h.hi - h.lo) * bins));
    ++h.counts[std::clamp(b, 0, bins - 1)];
  };
  for (const auto &g : set.rigids)
    add(g.beta);
  for (const auto &g : set.transients)
    add(g.beta);
  return h;
}

void write_histogram_plot(const DurationHistogram &h, const std::filesystem::path &file, int width, int height) {
  ImageD img(width, height, 3, 1.0);
  const int bins = static_cast<int>(h.counts.size());
  const std::size_t peak = std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
  const int margin = 8;
  const double bar_w = static_cast<double>(width - 2 * margin) / bins;
  for (int b = 0; b < bins; ++b) {
    const int bar_h = static_cast<int>(std::lround(static_cast<double>(h.counts[b]) / peak * (height - 2 * margin)));
    const int x0 = margin + static_cast<int>(b * bar_w) + 1;
    const int x1 = margin + static_cast<int>((b + 1) * bar_w) - 1;
    for (int y = height - margin - bar_h; y < height - margin; ++y)
      for (int x = x0; x <= x1; ++x)
        for (int c = 0; c < 3; ++c)
          img.at(x, y, c) = c == 2 ? 0.7 : 0.25;
  }
  for (int x = margin; x < width - margin; ++x)
    for (int c = 0; c < 3; ++c)
      img.at(x, height - margin, c) = 0.0;
  io::write_ppm(file, img);
}

} // namespace dynsplat
