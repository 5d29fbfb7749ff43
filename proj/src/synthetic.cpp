// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/synthetic.hpp"

#include "dynsplat/raw_io.hpp"
#include "dynsplat/rasterizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dynsplat {

using nlohmann::json;

namespace {

Vec3 vec3_or(const json &j, const char *key, const Vec3 &fallback) {
  if (!j.contains(key))
    return fallback;
  const auto &a = j.at(key);
  if (!a.is_array() || a.size() != 3)
    throw ValidationError(std::string("scene spec: '") + key + "' must be a 3-vector");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

Vec2 vec2_or(const json &j, const char *key, const Vec2 &fallback) {
  if (!j.contains(key))
    return fallback;
  const auto &a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ValidationError(std::string("scene spec: '") + key + "' must be a 2-vector");
  return {a[0].get<double>(), a[1].get<double>()};
}

MotionSpec parse_motion(const json &j) {
  MotionSpec m;
  const std::string type = j.value("type", "static");
  if (type == "static") {
    m.type = MotionType::Static;
  } else if (type == "rigid") {
    m.type = MotionType::Rigid;
    m.velocity = vec3_or(j, "velocity", m.velocity);
    m.angular_velocity = vec3_or(j, "angular_velocity", m.angular_velocity);
    m.amplitude = vec3_or(j, "amplitude", m.amplitude);
    m.period = j.value("period", m.period);
    if (j.contains("poses"))
      for (const auto &p : j.at("poses")) {
        SE3Transform t;
        const auto &r = p.at("rotation");
        for (int a = 0; a < 9; ++a)
          t.rotation(a / 3, a % 3) = r.at(a).get<double>();
        t.translation = vec3_or(p, "translation", Vec3::Zero());
        m.poses.push_back(t);
      }
  } else if (type == "erratic") {
    m.type = MotionType::Erratic;
    m.segment = j.value("segment", m.segment);
    m.speed = j.value("speed", m.speed);
    m.radius = j.value("radius", m.radius);
  } else {
    throw ValidationError("scene spec: unknown motion type '" + type + "'");
  }
  return m;
}

bool is_moving(const MotionSpec &m) {
  switch (m.type) {
  case MotionType::Static:
    return false;
  case MotionType::Erratic:
    return m.speed > 0.0;
  case MotionType::Rigid:
    if (!m.poses.empty())
      return true;
    return m.velocity.norm() > 0.0 || m.angular_velocity.norm() > 0.0 || m.amplitude.norm() > 0.0;
  }
  return false;
}

/// One Gaussian of the generated scene with its owner and (for erratic actors) its own path.
struct SceneGaussian {
  StaticGaussian rest;
  int actor = 0; ///< 0 = background
  std::vector<Vec3> offsets; ///< per-frame displacement, erratic actors only
};

struct Scene {
  std::vector<SceneGaussian> gaussians;
  std::vector<std::vector<SE3Transform>> poses; ///< [actor id][t], identity for non-rigid
};

double checker(double x, double y, double period) {
  const long ix = static_cast<long>(std::floor(x / period));
  const long iy = static_cast<long>(std::floor(y / period));
  return ((ix + iy) % 2 == 0) ? 1.0 : 0.0;
}

Vec3 textured(const Vec3 &base, double amount, const Vec3 &p, double spacing, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  const double c = checker(p.x(), p.y(), 4.0 * spacing) - 0.5;
  const double s = 0.5 * std::sin(2.1 * p.x() + 1.3 * p.y());
  Vec3 col;
  for (int k = 0; k < 3; ++k)
    col[k] = std::clamp(base[k] + amount * (c + 0.3 * s * (k - 1)) + jitter(rng), 0.02, 0.98);
  return col;
}

std::vector<Vec3> erratic_path(const MotionSpec &m, int frames, std::mt19937_64 &rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const int seg = std::max(1, m.segment);
  const double step = m.speed * seg;
  std::vector<Vec3> way{Vec3::Zero()};
  while (static_cast<int>(way.size() - 1) * seg < frames) {
    Vec3 d(n01(rng), n01(rng), n01(rng));
    d.normalize();
    Vec3 next = way.back() + step * d;
    if (next.norm() > m.radius)
      next = way.back() - step * d;
    if (next.norm() > m.radius)
      next = way.back() - step * way.back().normalized();
    way.push_back(next);
  }
  std::vector<Vec3> out(frames);
  for (int t = 0; t < frames; ++t) {
    const int k = t / seg;
    const double s = static_cast<double>(t - k * seg) / seg;
    out[t] = (1.0 - s) * way[k] + s * way[k + 1];
  }
  return out;
}

SE3Transform rigid_pose(const ActorSpec &a, int t) {
  const MotionSpec &m = a.motion;
  if (!m.poses.empty())
    return m.poses.at(t);
  const double tt = t;
  const Vec3 shift = m.velocity * tt + m.amplitude * std::sin(2.0 * std::numbers::pi * tt / m.period);
  const Mat3 r = rotation_from_axis_angle(m.angular_velocity * tt);
  // Rotation about the actor center, then translation.
  return {r, a.center - r * a.center + shift};
}

void add_grid(Scene &scene, int actor, const Vec3 &center, const Vec3 &size, double spacing, const Vec3 &color,
              double texture, double opacity, std::mt19937_64 &rng) {
  int n[3];
  for (int k = 0; k < 3; ++k)
    n[k] = size[k] > 0.0 ? static_cast<int>(std::lround(size[k] / spacing)) + 1 : 1;
  const bool flat = size.z() <= 0.0;
  const Vec3 log_scale = flat ? Vec3(std::log(0.6 * spacing), std::log(0.6 * spacing), std::log(0.1 * spacing))
                              : Vec3::Constant(std::log(0.6 * spacing));
  for (int iz = 0; iz < n[2]; ++iz)
    for (int iy = 0; iy < n[1]; ++iy)
      for (int ix = 0; ix < n[0]; ++ix) {
        SceneGaussian g;
        const Vec3 idx(ix, iy, iz);
        Vec3 p = center;
        for (int k = 0; k < 3; ++k)
          if (n[k] > 1)
            p[k] += -0.5 * size[k] + idx[k] * spacing;
        g.rest.mean = p;
        g.rest.log_scale = log_scale;
        g.rest.opacity_logit = logit(opacity);
        g.rest.color = textured(color, texture, p, spacing, rng);
        g.actor = actor;
        scene.gaussians.push_back(std::move(g));
      }
}

Scene build_scene(const SyntheticSceneSpec &spec, std::mt19937_64 &rng) {
  Scene scene;
  const auto &bg = spec.background;
  if (bg.enabled) {
    add_grid(scene, 0, Vec3(bg.center.x(), bg.center.y(), bg.depth), Vec3(bg.extent.x(), bg.extent.y(), 0.0),
             bg.spacing, bg.color, bg.texture, bg.opacity, rng);
    if (bg.relief > 0.0) {
      const double k = 2.0 * std::numbers::pi / bg.relief_period;
      for (auto &g : scene.gaussians)
        g.rest.mean.z() += bg.relief * std::sin(k * g.rest.mean.x()) * std::cos(k * g.rest.mean.y());
    }
  }
  scene.poses.assign(spec.actors.size() + 1, std::vector<SE3Transform>(spec.frames));
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const ActorSpec &a = spec.actors[i];
    const int id = static_cast<int>(i) + 1;
    const std::size_t first = scene.gaussians.size();
    add_grid(scene, id, a.center, a.size, a.spacing, a.color, a.texture, a.opacity, rng);
    if (a.motion.type == MotionType::Rigid)
      for (int t = 0; t < spec.frames; ++t)
        scene.poses[id][t] = rigid_pose(a, t);
    if (a.motion.type == MotionType::Erratic)
      for (std::size_t g = first; g < scene.gaussians.size(); ++g)
        scene.gaussians[g].offsets = erratic_path(a.motion, spec.frames, rng);
  }
  return scene;
}

Vec3 posed_mean(const Scene &s, std::size_t g, int t) {
  const SceneGaussian &sg = s.gaussians[g];
  Vec3 m = s.poses[sg.actor][t].apply(sg.rest.mean);
  if (!sg.offsets.empty())
    m += sg.offsets[t];
  return m;
}

/// Where the surface point X seen on Gaussian g at frame t sits at frame t2.
Vec3 move_point(const Scene &s, std::size_t g, int t, int t2, const Vec3 &x) {
  const SceneGaussian &sg = s.gaussians[g];
  const auto &poses = s.poses[sg.actor];
  Vec3 out = poses[t2].compose(poses[t].inverse()).apply(x);
  if (!sg.offsets.empty())
    out += sg.offsets[t2] - sg.offsets[t];
  return out;
}

GaussianSet snapshot(const Scene &s, int t) {
  GaussianSet set;
  set.statics.reserve(s.gaussians.size());
  for (std::size_t g = 0; g < s.gaussians.size(); ++g) {
    StaticGaussian sg = s.gaussians[g].rest;
    sg.mean = posed_mean(s, g, t);
    sg.quat = matrix_to_quat(s.poses[s.gaussians[g].actor][t].rotation * quat_to_matrix(sg.quat));
    set.statics.push_back(sg);
  }
  return set;
}

ImageD finish_image(const ImageD &color, const SyntheticSceneSpec &spec, std::mt19937_64 &rng) {
  ImageD out = color;
  if (spec.image_noise > 0.0) {
    std::normal_distribution<double> n(0.0, spec.image_noise);
    for (auto &v : out.data)
      v += n(rng);
  }
  for (auto &v : out.data) {
    v = std::clamp(v, 0.0, 1.0);
    if (spec.quantize)
      v = io::quantize_unit(v) / 255.0;
  }
  return out;
}

/// Per-pixel bookkeeping of one rendered frame.
struct FrameInfo {
  ImageD depth;
  std::vector<int> owner; ///< Gaussian index, -1 when uncovered
  ObjectIds ids;
  Mask pure; ///< one actor carries all the weight and alpha > 0.5
};

constexpr double kCoverageAlpha = 0.5;
constexpr double kPurity = 1e-9;

FrameInfo analyze_frame(const std::vector<Splat> &splats, const CameraFrame &cam, int num_actors) {
  const int w = cam.width(), h = cam.height();
  FrameInfo f{ImageD(w, h, 1), std::vector<int>(static_cast<std::size_t>(w) * h, -1), ObjectIds(w, h, 1),
              Mask(w, h, 1)};
  std::vector<double> actor_weight(num_actors + 1), actor_best(num_actors + 1);
  std::vector<int> actor_owner(num_actors + 1);
  for_each_contribution(splats, cam, RasterSettings{}, [&](int x, int y, std::span<const Contribution> hits) {
    std::fill(actor_weight.begin(), actor_weight.end(), 0.0);
    std::fill(actor_best.begin(), actor_best.end(), -1.0);
    double total = 0.0, zsum = 0.0;
    for (const auto &c : hits) {
      const Splat &s = splats[c.splat];
      const auto a = static_cast<std::size_t>(s.payload[channel::kDynMask]);
      total += c.weight;
      zsum += c.weight * s.depth;
      actor_weight[a] += c.weight;
      if (c.weight > actor_best[a]) {
        actor_best[a] = c.weight;
        actor_owner[a] = static_cast<int>(s.index);
      }
    }
    if (total <= kCoverageAlpha)
      return;
    const std::size_t pix = static_cast<std::size_t>(y) * w + x;
    f.depth.at(x, y) = zsum / total;
    // The owner is the strongest Gaussian of the dominant actor, so flow and label agree.
    const auto top = std::max_element(actor_weight.begin(), actor_weight.end());
    const auto id = static_cast<std::size_t>(top - actor_weight.begin());
    f.owner[pix] = actor_owner[id];
    f.ids.at(x, y) = static_cast<std::uint16_t>(id);
    f.pure.at(x, y) = *top >= (1.0 - kPurity) * total;
  });
  return f;
}

/// All four bilinear taps around (sx, sy) are pure pixels of `actor`.
bool taps_pure(const FrameInfo &f, double sx, double sy, int actor) {
  const int w = f.ids.width, h = f.ids.height;
  if (!(sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1))
    return false;
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  for (int y : {y0, y1})
    for (int x : {x0, x1})
      if (!f.pure.at(x, y) || f.ids.at(x, y) != actor)
        return false;
  return true;
}

} // namespace

void SyntheticSceneSpec::validate() const {
  if (width < 1 || height < 1)
    throw ValidationError("scene spec: image size must be positive");
  if (frames < 3)
    throw ValidationError("scene spec: at least 3 frames are required");
  if (!background.enabled && actors.empty())
    throw ValidationError("scene spec: needs a background or at least one actor");
  if (background.relief < 0.0 || !(background.relief_period > 0.0))
    throw ValidationError("scene spec: background relief must be >= 0 with a positive period");
  if (camera.fx <= 0.0 || camera.fy <= 0.0)
    throw ValidationError("scene spec: focal lengths must be positive");
  for (const auto &a : actors) {
    if (a.spacing <= 0.0)
      throw ValidationError("scene spec: actor spacing must be positive");
    if (!a.motion.poses.empty() && static_cast<int>(a.motion.poses.size()) != frames)
      throw ValidationError("scene spec: explicit poses must cover every frame");
    if (a.motion.type == MotionType::Erratic && a.motion.segment < 1)
      throw ValidationError("scene spec: erratic segment length must be >= 1");
  }
  for (int f : heldout_frames)
    if (f < 0 || f >= frames)
      throw ValidationError("scene spec: held-out frame out of range");
}

SyntheticSceneSpec parse_scene_spec(const std::string &json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw ValidationError(std::string("scene spec: ") + e.what());
  }
  SyntheticSceneSpec s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frames = j.value("frames", s.frames);
    s.seed = j.value("seed", s.seed);
    s.image_noise = j.value("image_noise", s.image_noise);
    s.depth_noise = j.value("depth_noise", s.depth_noise);
    s.quantize = j.value("quantize", s.quantize);
    s.tracks_per_actor = j.value("tracks_per_actor", s.tracks_per_actor);
    if (j.contains("camera")) {
      const auto &c = j.at("camera");
      s.camera.fx = c.value("fx", s.camera.fx);
      s.camera.fy = c.value("fy", s.camera.fy);
      s.camera.start = vec3_or(c, "start", s.camera.start);
      s.camera.velocity = vec3_or(c, "velocity", s.camera.velocity);
      s.camera.amplitude = vec3_or(c, "amplitude", s.camera.amplitude);
      s.camera.period = c.value("period", s.camera.period);
      s.camera.yaw_amplitude = c.value("yaw_amplitude", s.camera.yaw_amplitude);
    }
    if (j.contains("background")) {
      const auto &b = j.at("background");
      s.background.enabled = b.value("enabled", true);
      s.background.depth = b.value("depth", s.background.depth);
      s.background.relief = b.value("relief", s.background.relief);
      s.background.relief_period = b.value("relief_period", s.background.relief_period);
      s.background.center = vec2_or(b, "center", s.background.center);
      s.background.extent = vec2_or(b, "extent", s.background.extent);
      s.background.spacing = b.value("spacing", s.background.spacing);
      s.background.color = vec3_or(b, "color", s.background.color);
      s.background.texture = b.value("texture", s.background.texture);
      s.background.opacity = b.value("opacity", s.background.opacity);
    }
    if (j.contains("actors"))
      for (const auto &a : j.at("actors")) {
        ActorSpec actor;
        actor.center = vec3_or(a, "center", actor.center);
        actor.size = vec3_or(a, "size", actor.size);
        actor.spacing = a.value("spacing", actor.spacing);
        actor.color = vec3_or(a, "color", actor.color);
        actor.texture = a.value("texture", actor.texture);
        actor.opacity = a.value("opacity", actor.opacity);
        if (a.contains("motion"))
          actor.motion = parse_motion(a.at("motion"));
        s.actors.push_back(actor);
      }
    if (j.contains("heldout")) {
      const auto &h = j.at("heldout");
      s.heldout_offset = vec3_or(h, "offset", s.heldout_offset);
      if (h.contains("frames"))
        s.heldout_frames = h.at("frames").get<std::vector<int>>();
      if (h.contains("every")) {
        const int every = h.at("every").get<int>();
        if (every < 1)
          throw ValidationError("scene spec: heldout.every must be >= 1");
        for (int f = 0; f < s.frames; f += every)
          s.heldout_frames.push_back(f);
      }
    }
  } catch (const json::exception &e) {
    throw ValidationError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticSceneSpec load_scene_spec(const std::filesystem::path &file) {
  if (!std::filesystem::exists(file))
    throw MissingChannel(file.string());
  return parse_scene_spec(io::read_file(file));
}

CameraFrame synthetic_camera(const SyntheticSceneSpec &spec, int t) {
  const auto &c = spec.camera;
  const double phase = std::sin(2.0 * std::numbers::pi * t / c.period);
  const Vec3 center = c.start + c.velocity * t + c.amplitude * phase;
  const Mat3 cam_to_world = rotation_from_axis_angle(Vec3(0.0, c.yaw_amplitude * phase, 0.0));
  CameraFrame cam;
  cam.intrinsics = {c.fx, c.fy, 0.5 * (spec.width - 1), 0.5 * (spec.height - 1), spec.width, spec.height};
  cam.extrinsics.rotation = cam_to_world.transpose();
  cam.extrinsics.translation = -cam_to_world.transpose() * center;
  return cam;
}

SceneDataset generate_synthetic(const SyntheticSceneSpec &spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Scene scene = build_scene(spec, rng);
  const int nf = spec.frames, w = spec.width, h = spec.height;
  const int num_actors = static_cast<int>(spec.actors.size());

  SceneDataset ds;
  std::vector<FrameInfo> info;
  for (int t = 0; t < nf; ++t) {
    const CameraFrame cam = synthetic_camera(spec, t);
    GaussianSet snap = snapshot(scene, t);
    std::vector<Splat> splats = prepare_splats(snap, cam, 0);
    // The dyn-mask payload slot carries the owning actor id while analysing ownership.
    for (auto &s : splats)
      s.payload[channel::kDynMask] = scene.gaussians[s.index].actor;
    info.push_back(analyze_frame(splats, cam, num_actors));
    for (auto &s : splats)
      s.payload[channel::kDynMask] = 0.0;
    ds.images.push_back(finish_image(rasterize_forward(splats, cam).color(), spec, rng));
    ds.cameras.push_back(cam);
    ds.objects.push_back(info.back().ids);
  }

  // Flows and scene flow from the owning Gaussian's motion.
  for (int t = 0; t < nf; ++t) {
    const FrameInfo &fi = info[t];
    ImageD ff(w, h, 2), fb(w, h, 2), sf(w, h, 3), sb(w, h, 3);
    Mask valid(w, h, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int g = fi.owner[static_cast<std::size_t>(y) * w + x];
        if (g < 0)
          continue;
        const Vec3 p = unproject(Vec2(x, y), fi.depth.at(x, y), ds.cameras[t]);
        const int actor = scene.gaussians[g].actor;
        bool ok = fi.pure.at(x, y) != 0;
        for (int dir : {1, -1}) {
          const int t2 = t + dir;
          if (t2 < 0 || t2 >= nf)
            continue;
          const Vec3 q = move_point(scene, g, t, t2, p);
          const Vec3 qc = ds.cameras[t2].world_to_camera(q);
          if (!(qc.z() > kMinCameraDepth)) {
            ok = false;
            continue;
          }
          const Vec2 px = project(q, ds.cameras[t2]).pixel;
          ImageD &flow = dir > 0 ? ff : fb;
          ImageD &scene_flow = dir > 0 ? sf : sb;
          flow.at(x, y, 0) = px.x() - x;
          flow.at(x, y, 1) = px.y() - y;
          const Vec3 d = dir > 0 ? Vec3(q - p) : Vec3(p - q);
          for (int c = 0; c < 3; ++c)
            scene_flow.at(x, y, c) = d[c];
          ok = ok && taps_pure(info[t2], px.x(), px.y(), actor);
        }
        valid.at(x, y) = ok;
      }
    ds.flow_fwd.push_back(std::move(ff));
    ds.flow_bwd.push_back(std::move(fb));
    ds.gt_scene_flow_fwd.push_back(std::move(sf));
    ds.gt_scene_flow_bwd.push_back(std::move(sb));
    ds.gt_scene_flow_valid.push_back(std::move(valid));
  }

  for (int t = 0; t < nf; ++t) {
    ImageD d = info[t].depth;
    if (spec.depth_noise > 0.0) {
      std::normal_distribution<double> n(0.0, spec.depth_noise);
      for (auto &v : d.data)
        if (v > 0.0)
          v = std::max(1e-3, v + n(rng));
    }
    ds.depth.push_back(std::move(d));
  }

  // Ground-truth dynamic labels.
  for (int i = 0; i < num_actors; ++i)
    if (is_moving(spec.actors[i].motion))
      ds.gt_dynamic_ids.push_back(i + 1);
  for (int t = 0; t < nf; ++t) {
    Mask m(w, h, 1);
    for (std::size_t p = 0; p < m.data.size(); ++p)
      m.data[p] = std::find(ds.gt_dynamic_ids.begin(), ds.gt_dynamic_ids.end(), ds.objects[t].data[p]) !=
                  ds.gt_dynamic_ids.end();
    ds.gt_dyn_masks.push_back(std::move(m));
  }

  // Tracks: seeded Gaussian centers of every actor, visible when they own the surface at their pixel.
  std::vector<std::size_t> tracked;
  for (int a = 1; a <= num_actors; ++a) {
    std::vector<std::size_t> members;
    for (std::size_t g = 0; g < scene.gaussians.size(); ++g)
      if (scene.gaussians[g].actor == a)
        members.push_back(g);
    const std::size_t take = std::min<std::size_t>(members.size(), std::max(0, spec.tracks_per_actor));
    std::sample(members.begin(), members.end(), std::back_inserter(tracked), take, rng);
  }
  ds.tracks = TrackSet(static_cast<int>(tracked.size()), nf);
  for (std::size_t i = 0; i < tracked.size(); ++i) {
    const std::size_t g = tracked[i];
    const int actor = scene.gaussians[g].actor;
    const double extent = scene.gaussians[g].rest.log_scale.array().exp().maxCoeff();
    for (int t = 0; t < nf; ++t) {
      const Vec3 m = posed_mean(scene, g, t);
      const Vec3 mc = ds.cameras[t].world_to_camera(m);
      if (!(mc.z() > kMinCameraDepth))
        continue;
      const Vec2 px = project(m, ds.cameras[t]).pixel;
      ds.tracks.u(static_cast<int>(i), t) = static_cast<float>(px.x());
      ds.tracks.v(static_cast<int>(i), t) = static_cast<float>(px.y());
      const int xi = static_cast<int>(std::lround(px.x())), yi = static_cast<int>(std::lround(px.y()));
      if (xi < 0 || yi < 0 || xi >= w || yi >= h)
        continue;
      const double d = info[t].depth.at(xi, yi);
      const bool vis = ds.objects[t].at(xi, yi) == actor && d > 0.0 && std::abs(d - mc.z()) <= 0.05 * mc.z() + 2.0 * extent;
      ds.tracks.vis(static_cast<int>(i), t) = vis ? 1.f : 0.f;
    }
  }

  // Held-out views from offset cameras.
  for (int f : spec.heldout_frames) {
    HeldOutView v;
    v.frame = f;
    v.camera = synthetic_camera(spec, f);
    const Vec3 center = v.camera.center() + spec.heldout_offset;
    v.camera.extrinsics.translation = -v.camera.extrinsics.rotation * center;
    v.image = finish_image(render(snapshot(scene, f), v.camera, 0).color(), spec, rng);
    ds.heldout.push_back(std::move(v));
  }

  // The generating set, when every actor is representable (static or rigid).
  const bool representable = std::none_of(spec.actors.begin(), spec.actors.end(),
                                          [](const ActorSpec &a) { return a.motion.type == MotionType::Erratic; });
  if (representable) {
    GaussianSet set;
    std::vector<int> basis_of(num_actors + 1, -1);
    int k = 0;
    for (int a = 1; a <= num_actors; ++a)
      if (spec.actors[a - 1].motion.type == MotionType::Rigid && is_moving(spec.actors[a - 1].motion))
        basis_of[a] = k++;
    set.bases = MotionBases(k, nf);
    for (int a = 1; a <= num_actors; ++a)
      if (basis_of[a] >= 0)
        for (int t = 0; t < nf; ++t)
          set.bases.at(basis_of[a], t) = scene.poses[a][t];
    for (const auto &g : scene.gaussians) {
      if (basis_of[g.actor] < 0) {
        set.statics.push_back(g.rest);
        continue;
      }
      RigidGaussian r;
      static_cast<StaticGaussian &>(r) = g.rest;
      r.weights = Eigen::VectorXd::Zero(k);
      r.weights[basis_of[g.actor]] = 1.0;
      r.beta = 10.0 * nf;
      r.gamma = 0.5 * (nf - 1);
      r.origin = g.actor;
      set.rigids.push_back(r);
    }
    ds.gt_set = std::move(set);
  }
  ds.validate();
  return ds;
}

} // namespace dynsplat
