// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace dynsplat {

/// Label map for one frame: 0 is background, k >= 1 is object k.
using ObjectIds = Image<std::uint16_t>;

struct PixelMatch {
  Vec2 left;
  Vec2 right;
};

/// Forward-backward consistency check. `bwd_next` is the backward flow of frame t+1.
Mask occlusion_mask(const ImageD &fwd, const ImageD &bwd_next);

/// (1 - occ) / (1 + u)^2.
double flow_weight(double uncertainty, bool occluded);

/// Point-to-epipolar residual |x_l^T F x_r| / sqrt(|F x_l|^2 + |F x_r|^2) on homogeneous pixels.
double sampson_error(const Vec3 &x_left, const Vec3 &x_right, const Mat3 &f);

constexpr std::size_t kMaxFundamentalMatches = 10000;

/// Least-median-of-squares over normalized 8-point solves on random minimal samples.
/// Satisfies x_l^T F x_r = 0, rank 2, unit Frobenius norm.
Mat3 estimate_fundamental(std::span<const PixelMatch> matches, int trials = 256, std::uint64_t seed = 0);

/// Normalized 8-point solve on all given matches (>= 8); throws DegenerateConfiguration when rank deficient.
std::optional<Mat3> eight_point(std::span<const PixelMatch> matches);

/// Weighted mean of `errors`; 0 when the weights sum to less than 1e-12.
double frame_motion_score(std::span<const double> weights, std::span<const double> errors);

struct ObjectScore {
  double score = 0.0;
  std::vector<int> frames;
};

ObjectScore object_motion_score(std::span<const double> per_frame, double eps_temp);

struct MotionScoreTable {
  /// Per-object per-frame scores s_{i,t}; frames where the object is absent hold 0.
  std::map<int, std::vector<double>> per_frame;
  std::map<int, ObjectScore> objects;
  double eps_temp = 1e-4;
  double eps_dyn = 0.0;
};

struct DynMaskOptions {
  double eps_temp = 1e-4;
  std::optional<double> eps_dyn; ///< defaults to max_i(s_i) / 4
  int trials = 256;
  std::uint64_t seed = 0;
};

/// Scores every object id over frames 0..T-2 using pairs (t, t+1) linked by the forward flow.
/// `uncertainty` may be empty (treated as zero).
MotionScoreTable compute_motion_scores(std::span<const ImageD> flow_fwd, std::span<const ImageD> flow_bwd,
                                       std::span<const ImageD> uncertainty, std::span<const ObjectIds> objects,
                                       const DynMaskOptions &options);

/// Union of the masks of every object whose score exceeds `eps_dyn`.
std::vector<Mask> compose_dynamic_masks(const MotionScoreTable &table, std::span<const ObjectIds> objects);

/// Objects classified dynamic by the table.
std::vector<int> dynamic_objects(const MotionScoreTable &table);

double mask_iou(const Mask &a, const Mask &b);

} // namespace dynsplat
