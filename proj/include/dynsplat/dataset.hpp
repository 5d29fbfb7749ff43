// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/dynmask.hpp"
#include "dynsplat/primitives.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace dynsplat {

/// N x T x 3 float32 table: pixel u, pixel v, visibility in {0, 1}.
struct TrackSet {
  int n = 0;
  int t = 0;
  std::vector<float> data;

  TrackSet() = default;
  TrackSet(int num_tracks, int num_frames) : n(num_tracks), t(num_frames), data(std::size_t(num_tracks) * num_frames * 3, 0.f) {}
  float &u(int i, int f) { return data[(std::size_t(i) * t + f) * 3]; }
  float &v(int i, int f) { return data[(std::size_t(i) * t + f) * 3 + 1]; }
  float &vis(int i, int f) { return data[(std::size_t(i) * t + f) * 3 + 2]; }
  float u(int i, int f) const { return data[(std::size_t(i) * t + f) * 3]; }
  float v(int i, int f) const { return data[(std::size_t(i) * t + f) * 3 + 1]; }
  bool visible(int i, int f) const { return data[(std::size_t(i) * t + f) * 3 + 2] > 0.5f; }
};

struct HeldOutView {
  int frame = 0;
  CameraFrame camera;
  ImageD image;
};

struct SceneDataset {
  std::vector<ImageD> images; ///< H x W x 3 in [0, 1]
  std::vector<CameraFrame> cameras;
  std::vector<ImageD> depth;    ///< H x W, camera z
  std::vector<ImageD> flow_fwd; ///< H x W x 2, pixels to t+1 (zero on the last frame)
  std::vector<ImageD> flow_bwd; ///< H x W x 2, pixels to t-1 (zero on the first frame)
  std::vector<ImageD> uncertainty; ///< optional
  std::vector<ObjectIds> objects;
  std::vector<Mask> dyn_masks; ///< optional precomputed dynamic masks
  TrackSet tracks;

  // Optional ground truth.
  std::vector<int> gt_dynamic_ids;
  std::vector<Mask> gt_dyn_masks;
  std::vector<ImageD> gt_scene_flow_fwd;
  std::vector<ImageD> gt_scene_flow_bwd;
  std::vector<Mask> gt_scene_flow_valid; ///< pixels where the ground-truth flow is well defined
  std::optional<GaussianSet> gt_set;
  std::vector<HeldOutView> heldout;

  int num_frames() const { return static_cast<int>(images.size()); }
  int width() const { return images.empty() ? 0 : images.front().width; }
  int height() const { return images.empty() ? 0 : images.front().height; }
  /// Throws ShapeMismatch when per-frame arrays disagree.
  void validate() const;
};

/// Layout: frames/%05d.ppm, depth/%05d.f32, flow_fwd/, flow_bwd/, uncert/ (optional), objects/%05d.u16,
/// cameras.json, tracks.f32 + tracks.json, optional dynmask/, gt/, heldout/.
void save_dataset(const SceneDataset &ds, const std::filesystem::path &dir);
SceneDataset load_dataset(const std::filesystem::path &dir);

std::vector<CameraFrame> load_cameras(const std::filesystem::path &file);
void save_cameras(const std::filesystem::path &file, const std::vector<CameraFrame> &cams);

} // namespace dynsplat
