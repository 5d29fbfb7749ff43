// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

// Shared between the forward, reference and backward rasterizer translation units.

#pragma once

#include "dynsplat/rasterizer.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace dynsplat::detail {

/// Everything derived from one Gaussian at query time t; the backward pass re-evaluates this.
struct GaussianEval {
  Vec3 mean_world;
  Mat3 rot_canonical; ///< R(q)
  Mat3 rot_world;
  Vec3 scales;
  Mat3 cov_world;
  Vec3 mean_cam;
  Mat23 jac;
  Mat23 m; ///< jac * W
  Mat2 cov2d;
  Vec2 mean2d;
  double base_opacity = 0.0;
  double gate = 1.0;
  double opacity;
  int normal_axis;
  double normal_sign;
  std::array<double, channel::kCount> payload{};
};

/// Returns nullopt when the mean is not in front of the camera.
std::optional<GaussianEval> evaluate_gaussian(const GaussianSet &set, Population pop, std::size_t index,
                                              const CameraFrame &cam, int t, std::optional<int> t_corr);

/// Depth-sorted splat order and per-tile lists (each list inherits the global order).
struct RasterPlan {
  int tiles_x = 0;
  int tiles_y = 0;
  int tile_size = 16;
  std::vector<std::uint32_t> order;
  std::vector<std::vector<std::uint32_t>> tiles;
};

std::vector<std::uint32_t> depth_order(std::span<const Splat> splats);
RasterPlan build_plan(std::span<const Splat> splats, int width, int height, const RasterSettings &settings);

/// Screen-space conic (inverse covariance) of a splat.
inline Mat2 conic_of(const Splat &s) { return s.cov2d.inverse(); }

struct ConicSplat {
  double mx, my;
  double a, b, c; ///< conic entries: q = a dx^2 + 2 b dx dy + c dy^2
  double opacity;
};

inline ConicSplat to_conic(const Splat &s) {
  const Mat2 inv = conic_of(s);
  return {s.mean2d.x(), s.mean2d.y(), inv(0, 0), 0.5 * (inv(0, 1) + inv(1, 0)), inv(1, 1), s.opacity};
}

/// Pre-clamp alpha o * exp(-q / 2) and the Mahalanobis term q.
inline double raw_alpha(const ConicSplat &s, double px, double py, double *q_out = nullptr) {
  const double dx = px - s.mx;
  const double dy = py - s.my;
  const double q = s.a * dx * dx + 2.0 * s.b * dx * dy + s.c * dy * dy;
  if (q_out)
    *q_out = q;
  return s.opacity * std::exp(-0.5 * q);
}

} // namespace dynsplat::detail
