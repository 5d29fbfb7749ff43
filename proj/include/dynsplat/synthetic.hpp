// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dynsplat {

/// Camera center c(t) = start + velocity t + amplitude * sin(2 pi t / period); the optical axis is +z,
/// optionally yawed by yaw_amplitude * sin(2 pi t / period) radians.
struct CameraPathSpec {
  double fx = 60.0;
  double fy = 60.0;
  Vec3 start = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();
  double period = 24.0;
  double yaw_amplitude = 0.0;
};

/// Textured slab of Gaussians facing the camera (object id 0). With relief > 0 the depth varies as
/// depth + relief * sin(2 pi x / relief_period) * cos(2 pi y / relief_period).
struct BackgroundSpec {
  bool enabled = true;
  double depth = 8.0;
  double relief = 0.0;
  double relief_period = 4.0;
  Vec2 center = Vec2::Zero();
  Vec2 extent = Vec2(12.0, 12.0);
  double spacing = 0.25;
  Vec3 color = Vec3(0.5, 0.5, 0.5);
  double texture = 0.35;
  double opacity = 0.95;
};

enum class MotionType { Static, Rigid, Erratic };

struct MotionSpec {
  MotionType type = MotionType::Static;
  // Rigid: pose(t) = translate(velocity t + amplitude sin(2 pi t / period)) * rotate(angular_velocity t)
  // about the actor center; or explicit per-frame poses when `poses` is non-empty.
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();
  double period = 24.0;
  std::vector<SE3Transform> poses;
  // Erratic: every Gaussian follows its own piecewise-linear path; a new direction is drawn every
  // `segment` frames and each segment covers speed * segment scene units, kept within `radius`.
  int segment = 5;
  double speed = 0.05;
  double radius = 0.4;
};

/// Box of Gaussians on a regular grid; a zero z-size gives a flat fronto-parallel slab.
struct ActorSpec {
  Vec3 center = Vec3(0, 0, 5);
  Vec3 size = Vec3(1, 1, 0);
  double spacing = 0.15;
  Vec3 color = Vec3(0.8, 0.3, 0.2);
  double texture = 0.2;
  double opacity = 0.95;
  MotionSpec motion;
};

struct SyntheticSceneSpec {
  int width = 64;
  int height = 64;
  int frames = 48;
  std::uint64_t seed = 0;
  CameraPathSpec camera;
  BackgroundSpec background;
  std::vector<ActorSpec> actors; ///< object ids 1..n in order
  double image_noise = 0.0;
  double depth_noise = 0.0;
  /// Round images to 8 bits (as stored on disk).
  bool quantize = true;
  int tracks_per_actor = 48;
  std::vector<int> heldout_frames;
  Vec3 heldout_offset = Vec3(0.15, 0.0, 0.0);

  void validate() const;
};

SyntheticSceneSpec parse_scene_spec(const std::string &json_text);
SyntheticSceneSpec load_scene_spec(const std::filesystem::path &file);

/// Camera of frame t on the spec's path.
CameraFrame synthetic_camera(const SyntheticSceneSpec &spec, int t);

SceneDataset generate_synthetic(const SyntheticSceneSpec &spec);

} // namespace dynsplat
