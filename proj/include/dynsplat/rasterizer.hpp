// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/primitives.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace dynsplat {

/// Layout of the composited payload channels.
namespace channel {
constexpr int kColor = 0;   // 3
constexpr int kDepth = 3;   // 1
constexpr int kDynMask = 4; // 1
constexpr int kNormal = 5;  // 3
constexpr int kVelFwd = 8;  // 3
constexpr int kVelBwd = 11; // 3
constexpr int kCorr = 14;   // 3
constexpr int kCount = 17;
} // namespace channel

enum class Population : std::uint8_t { Static = 0, Rigid = 1, Transient = 2 };

struct RasterSettings {
  int tile_size = 16;
  double max_alpha = 0.999;
  /// Per-pixel contributions below this are skipped; also bounds the tile footprint.
  double min_alpha = 1.0 / 255.0;
  double min_transmittance = 1e-4;
  /// Splats whose effective opacity falls below this are dropped in prepare_splats.
  double cull_opacity = 1.0 / 255.0;
};

struct Splat {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth = 1.0;
  double opacity = 0.0; ///< effective (post-gating) opacity
  std::array<double, channel::kCount> payload{};
  Population population = Population::Static;
  std::uint32_t index = 0; ///< index of the source Gaussian inside its population
};

struct RenderOutputs {
  int width = 0;
  int height = 0;
  ImageD channels;      ///< kCount channels, alpha-composited, not normalized
  ImageD alpha;         ///< 1 - final transmittance
  ImageD transmittance; ///< final transmittance

  RenderOutputs() = default;
  RenderOutputs(int w, int h);
  ImageD extract(int first, int count) const;
  ImageD color() const { return extract(channel::kColor, 3); }
  ImageD depth() const { return extract(channel::kDepth, 1); }
  ImageD dyn_mask() const { return extract(channel::kDynMask, 1); }
  ImageD normal() const { return extract(channel::kNormal, 3); }
  ImageD velocity_fwd() const { return extract(channel::kVelFwd, 3); }
  ImageD velocity_bwd() const { return extract(channel::kVelBwd, 3); }
  ImageD correspondence() const { return extract(channel::kCorr, 3); }
};

/// Adjoints of a scalar loss with respect to every rendered quantity.
struct RenderGrads {
  ImageD channels;
  ImageD alpha;

  RenderGrads() = default;
  RenderGrads(int w, int h) : channels(w, h, channel::kCount), alpha(w, h, 1) {}
};

/// Parameter-shaped gradient accumulators. Basis entries are indexed j * T + t and hold the
/// gradient w.r.t. the first two rotation columns and the translation.
struct GradientBuffers {
  std::vector<StaticGaussian> statics;
  std::vector<RigidGaussian> rigids;
  std::vector<TransientGaussian> transients;
  std::vector<Vec6> basis_rotation;
  std::vector<Vec3> basis_translation;

  static GradientBuffers zeros_like(const GaussianSet &set);
  GradientBuffers &operator+=(const GradientBuffers &other);
  bool all_finite() const;
};

/// Gradients of the loss w.r.t. per-splat screen-space quantities (before the 3D chain rule).
struct SplatGrad {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Zero(); ///< symmetric; gradient treating cov2d as a full matrix
  double opacity = 0.0;
  std::array<double, channel::kCount> payload{};
};

std::vector<Splat> prepare_splats(const GaussianSet &set, const CameraFrame &cam, int t,
                                  std::optional<int> t_corr = std::nullopt, const RasterSettings &settings = {});

/// Tiled forward compositing; parallel over tiles.
RenderOutputs rasterize_forward(std::span<const Splat> splats, const CameraFrame &cam,
                                const RasterSettings &settings = {});

/// Serial brute-force compositing over the globally sorted list, no tiling and no early exit.
RenderOutputs rasterize_reference(std::span<const Splat> splats, const CameraFrame &cam,
                                  const RasterSettings &settings = {});

/// Pixel stage of the backward pass: per-splat screen-space gradients.
std::vector<SplatGrad> rasterize_backward_splats(std::span<const Splat> splats, const CameraFrame &cam,
                                                 const RenderOutputs &outputs, const RenderGrads &grads,
                                                 const RasterSettings &settings = {});

/// Full backward pass down to every optimizable parameter of the set.
GradientBuffers rasterize_backward(std::span<const Splat> splats, const CameraFrame &cam,
                                   const RenderOutputs &outputs, const RenderGrads &grads, const GaussianSet &set,
                                   int t, std::optional<int> t_corr = std::nullopt,
                                   const RasterSettings &settings = {});

/// Chain rule from per-splat screen-space gradients to the parameters, accumulated into `out`.
void backpropagate_splats(std::span<const Splat> splats, std::span<const SplatGrad> splat_grads,
                          const CameraFrame &cam, const GaussianSet &set, int t, std::optional<int> t_corr,
                          GradientBuffers &out);

/// prepare_splats + rasterize_forward.
RenderOutputs render(const GaussianSet &set, const CameraFrame &cam, int t, std::optional<int> t_corr = std::nullopt,
                     const RasterSettings &settings = {});

struct Contribution {
  std::uint32_t splat; ///< index into the splat list
  double weight;       ///< alpha * transmittance
};

/// Visits every pixel with its front-to-back contributions, following the same tiling, skip and
/// termination rules as rasterize_forward. Serial; pixels are visited tile by tile.
void for_each_contribution(std::span<const Splat> splats, const CameraFrame &cam, const RasterSettings &settings,
                           const std::function<void(int, int, std::span<const Contribution>)> &visit);

/// Alpha of one splat at a pixel center before clamping/skip rules; exposed for tests.
double splat_falloff(const Splat &s, double px, double py);

} // namespace dynsplat
