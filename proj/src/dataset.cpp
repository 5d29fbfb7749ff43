// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/dataset.hpp"

#include "dynsplat/checkpoint.hpp"
#include "dynsplat/raw_io.hpp"

#include <json.hpp>

#include <cstring>

namespace dynsplat {

namespace fs = std::filesystem;
using nlohmann::json;

void SceneDataset::validate() const {
  const int nf = num_frames();
  if (nf == 0)
    throw ShapeMismatch("dataset has no frames");
  const int w = width(), h = height();
  auto check = [&](const auto &list, const char *name, bool optional) {
    if (list.empty() && optional)
      return;
    if (static_cast<int>(list.size()) != nf)
      throw ShapeMismatch(std::string(name) + ": expected " + std::to_string(nf) + " frames");
    for (const auto &img : list)
      if (!img.same_shape(w, h))
        throw ShapeMismatch(std::string(name) + ": frame size differs from the images");
  };
  check(images, "frames", false);
  check(depth, "depth", false);
  check(flow_fwd, "flow_fwd", false);
  check(flow_bwd, "flow_bwd", false);
  check(uncertainty, "uncert", true);
  check(objects, "objects", false);
  check(dyn_masks, "dynmask", true);
  check(gt_dyn_masks, "gt/dynmask", true);
  check(gt_scene_flow_fwd, "gt/sceneflow_fwd", true);
  check(gt_scene_flow_bwd, "gt/sceneflow_bwd", true);
  check(gt_scene_flow_valid, "gt/sceneflow_valid", true);
  if (static_cast<int>(cameras.size()) != nf)
    throw ShapeMismatch("cameras.json: expected one camera per frame");
  for (const auto &c : cameras)
    if (c.width() != w || c.height() != h)
      throw ShapeMismatch("cameras.json: camera size differs from the images");
  if (tracks.n > 0 && tracks.t != nf)
    throw ShapeMismatch("tracks: frame count differs");
}

namespace {

json camera_json(const CameraFrame &c) {
  json w2c = json::array();
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 4; ++k) {
      double v = 0.0;
      if (r < 3)
        v = k < 3 ? c.extrinsics.rotation(r, k) : c.extrinsics.translation[r];
      else
        v = k == 3 ? 1.0 : 0.0;
      w2c.push_back(v);
    }
  const auto &k = c.intrinsics;
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}, {"w2c", w2c}};
}

CameraFrame camera_from_json(const json &j) {
  CameraFrame c;
  c.intrinsics = {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                  j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>()};
  const auto &w2c = j.at("w2c");
  if (w2c.size() != 16)
    throw ShapeMismatch("camera w2c must have 16 entries");
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k)
      c.extrinsics.rotation(r, k) = w2c[r * 4 + k].get<double>();
    c.extrinsics.translation[r] = w2c[r * 4 + 3].get<double>();
  }
  c.intrinsics.validate();
  return c;
}

template <typename T, typename Reader>
std::vector<T> read_sequence(const fs::path &dir, const char *ext, int count, Reader reader, bool optional,
                             const char *channel) {
  std::vector<T> out;
  if (!fs::is_directory(dir)) {
    if (optional)
      return out;
    throw MissingChannel(channel);
  }
  for (int t = 0; t < count; ++t) {
    const fs::path p = dir / io::frame_name(t, ext);
    if (!fs::exists(p))
      throw MissingChannel(std::string(channel) + " (" + p.string() + ")");
    out.push_back(reader(p));
  }
  return out;
}

template <typename T, typename Writer>
void write_sequence(const fs::path &dir, const char *ext, const std::vector<T> &items, Writer writer) {
  if (items.empty())
    return;
  fs::create_directories(dir);
  for (std::size_t t = 0; t < items.size(); ++t)
    writer(dir / io::frame_name(static_cast<int>(t), ext), items[t]);
}

int count_frames(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw MissingChannel("frames");
  int n = 0;
  while (fs::exists(dir / io::frame_name(n, ".ppm")))
    ++n;
  if (n == 0)
    throw MissingChannel("frames");
  return n;
}

} // namespace

std::vector<CameraFrame> load_cameras(const fs::path &file) {
  if (!fs::exists(file))
    throw MissingChannel("cameras.json");
  json j;
  try {
    j = json::parse(io::read_file(file));
  } catch (const json::exception &e) {
    throw ShapeMismatch(file.string() + ": " + e.what());
  }
  std::vector<CameraFrame> cams;
  for (const auto &c : j.at("frames"))
    cams.push_back(camera_from_json(c));
  return cams;
}

void save_cameras(const fs::path &file, const std::vector<CameraFrame> &cams) {
  json j;
  j["frames"] = json::array();
  for (const auto &c : cams)
    j["frames"].push_back(camera_json(c));
  io::atomic_write(file, j.dump(1));
}

void save_dataset(const SceneDataset &ds, const fs::path &dir) {
  ds.validate();
  fs::create_directories(dir);
  write_sequence(dir / "frames", ".ppm", ds.images, io::write_ppm);
  write_sequence(dir / "depth", ".f32", ds.depth, io::write_f32);
  write_sequence(dir / "flow_fwd", ".f32", ds.flow_fwd, io::write_f32);
  write_sequence(dir / "flow_bwd", ".f32", ds.flow_bwd, io::write_f32);
  write_sequence(dir / "uncert", ".f32", ds.uncertainty, io::write_f32);
  write_sequence(dir / "objects", ".u16", ds.objects, io::write_u16);
  write_sequence(dir / "dynmask", ".u8", ds.dyn_masks, io::write_u8);
  save_cameras(dir / "cameras.json", ds.cameras);

  std::string raw(ds.tracks.data.size() * sizeof(float), '\0');
  if (!raw.empty())
    std::memcpy(raw.data(), ds.tracks.data.data(), raw.size());
  io::atomic_write(dir / "tracks.f32", raw);
  io::atomic_write(dir / "tracks.json", json{{"n", ds.tracks.n}, {"t", ds.tracks.t}}.dump());

  const fs::path gt = dir / "gt";
  if (!ds.gt_dynamic_ids.empty() || !ds.gt_dyn_masks.empty() || ds.gt_set) {
    fs::create_directories(gt);
    io::atomic_write(gt / "labels.json", json{{"dynamic_ids", ds.gt_dynamic_ids}}.dump());
  }
  write_sequence(gt / "dynmask", ".u8", ds.gt_dyn_masks, io::write_u8);
  write_sequence(gt / "sceneflow_fwd", ".f32", ds.gt_scene_flow_fwd, io::write_f32);
  write_sequence(gt / "sceneflow_bwd", ".f32", ds.gt_scene_flow_bwd, io::write_f32);
  write_sequence(gt / "sceneflow_valid", ".u8", ds.gt_scene_flow_valid, io::write_u8);
  if (ds.gt_set)
    save_checkpoint(gt / "scene.ckpt", *ds.gt_set);

  if (!ds.heldout.empty()) {
    const fs::path ho = dir / "heldout";
    fs::create_directories(ho / "frames");
    json j;
    j["views"] = json::array();
    for (std::size_t i = 0; i < ds.heldout.size(); ++i) {
      j["views"].push_back({{"frame", ds.heldout[i].frame}, {"camera", camera_json(ds.heldout[i].camera)}});
      io::write_ppm(ho / "frames" / io::frame_name(static_cast<int>(i), ".ppm"), ds.heldout[i].image);
    }
    io::atomic_write(ho / "views.json", j.dump(1));
  }
}

SceneDataset load_dataset(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw MissingChannel(dir.string());
  SceneDataset ds;
  const int nf = count_frames(dir / "frames");
  ds.images = read_sequence<ImageD>(dir / "frames", ".ppm", nf, io::read_ppm, false, "frames");
  ds.depth = read_sequence<ImageD>(dir / "depth", ".f32", nf, io::read_f32, false, "depth");
  ds.flow_fwd = read_sequence<ImageD>(dir / "flow_fwd", ".f32", nf, io::read_f32, false, "flow_fwd");
  ds.flow_bwd = read_sequence<ImageD>(dir / "flow_bwd", ".f32", nf, io::read_f32, false, "flow_bwd");
  ds.uncertainty = read_sequence<ImageD>(dir / "uncert", ".f32", nf, io::read_f32, true, "uncert");
  ds.objects = read_sequence<ObjectIds>(dir / "objects", ".u16", nf, io::read_u16, false, "objects");
  ds.dyn_masks = read_sequence<Mask>(dir / "dynmask", ".u8", nf, io::read_u8, true, "dynmask");
  ds.cameras = load_cameras(dir / "cameras.json");

  if (!fs::exists(dir / "tracks.json") || !fs::exists(dir / "tracks.f32"))
    throw MissingChannel("tracks");
  const json tj = json::parse(io::read_file(dir / "tracks.json"));
  ds.tracks = TrackSet(tj.at("n").get<int>(), tj.at("t").get<int>());
  const std::string raw = io::read_file(dir / "tracks.f32");
  if (raw.size() != ds.tracks.data.size() * sizeof(float))
    throw ShapeMismatch("tracks.f32: size disagrees with tracks.json");
  if (!raw.empty())
    std::memcpy(ds.tracks.data.data(), raw.data(), raw.size());
  for (std::size_t i = 2; i < ds.tracks.data.size(); i += 3)
    if (ds.tracks.data[i] != 0.f && ds.tracks.data[i] != 1.f)
      throw ShapeMismatch("tracks.f32: visibility must be 0 or 1");

  const fs::path gt = dir / "gt";
  if (fs::exists(gt / "labels.json"))
    ds.gt_dynamic_ids = json::parse(io::read_file(gt / "labels.json")).at("dynamic_ids").get<std::vector<int>>();
  ds.gt_dyn_masks = read_sequence<Mask>(gt / "dynmask", ".u8", nf, io::read_u8, true, "gt/dynmask");
  ds.gt_scene_flow_fwd = read_sequence<ImageD>(gt / "sceneflow_fwd", ".f32", nf, io::read_f32, true, "gt/sceneflow_fwd");
  ds.gt_scene_flow_bwd = read_sequence<ImageD>(gt / "sceneflow_bwd", ".f32", nf, io::read_f32, true, "gt/sceneflow_bwd");
  ds.gt_scene_flow_valid =
      read_sequence<Mask>(gt / "sceneflow_valid", ".u8", nf, io::read_u8, true, "gt/sceneflow_valid");
  if (fs::exists(gt / "scene.ckpt"))
    ds.gt_set = load_checkpoint(gt / "scene.ckpt");

  const fs::path ho = dir / "heldout";
  if (fs::exists(ho / "views.json")) {
    const json j = json::parse(io::read_file(ho / "views.json"));
    int i = 0;
    for (const auto &v : j.at("views")) {
      HeldOutView view;
      view.frame = v.at("frame").get<int>();
      view.camera = camera_from_json(v.at("camera"));
      view.image = io::read_ppm(ho / "frames" / io::frame_name(i++, ".ppm"));
      ds.heldout.push_back(std::move(view));
    }
  }
  ds.validate();
  return ds;
}

} // namespace dynsplat
