// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/dataset.hpp"

#include <cstdint>
#include <vector>

namespace dynsplat {

/// Dilates a binary mask by `radius` pixels (8-neighbourhood).
Mask dilate(const Mask &m, int radius);

struct StaticInitOptions {
  int frames_sampled = 4; ///< evenly spaced over the sequence
  int stride = 2;         ///< one pixel per stride x stride cell
  std::uint64_t seed = 0;
};

/// Unprojects a stratified subsample of static pixels (outside the 1-px dilated dynamic mask).
std::vector<StaticGaussian> init_static(const SceneDataset &ds, std::span<const Mask> dyn_masks,
                                        const StaticInitOptions &options);

struct RigidInit {
  std::vector<RigidGaussian> gaussians;
  MotionBases bases;
  int canonical_frame = 0;
  std::vector<int> track_ids; ///< source track of each Gaussian
  std::vector<int> cluster;   ///< basis index of each Gaussian
};

/// Lifted 3D trajectory of one track; `visible[f]` marks frames with a valid lift.
struct LiftedTrack {
  std::vector<Vec3> points;
  std::vector<bool> visible;
  int first = -1;
  int last = -1;
};

std::vector<LiftedTrack> lift_tracks(const TrackSet &tracks, std::span<const ImageD> depth,
                                     std::span<const CameraFrame> cams);

/// Least-squares rigid transform q ~ R p + t with per-point weights (orthogonal Procrustes).
SE3Transform fit_rigid(std::span<const Vec3> p, std::span<const Vec3> q, std::span<const double> weights);

/// k-means++ seeding followed by Lloyd iterations; returns one label per row.
std::vector<int> kmeans(const std::vector<Eigen::VectorXd> &rows, int k, int iterations, std::uint64_t seed);

/// Clusters dynamic tracks into K motion bases and creates one rigid Gaussian per track.
/// Bases are identity at the canonical frame (the frame with most visible dynamic tracks).
RigidInit init_rigid_from_tracks(const SceneDataset &ds, std::span<const Mask> dyn_masks, int num_bases,
                                 std::uint64_t seed);

} // namespace dynsplat
