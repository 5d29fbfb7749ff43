// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "raster_internal.hpp"

#include <algorithm>

namespace dynsplat {

namespace {

/// Composites one pixel front to back over `list` (indices into `conics`/`splats`).
void composite_pixel(std::span<const Splat> splats, std::span<const detail::ConicSplat> conics,
                     const std::vector<std::uint32_t> &list, int x, int y, const RasterSettings &settings,
                     double *accum, double &transmittance) {
  double t = 1.0;
  for (std::uint32_t idx : list) {
    const double raw = detail::raw_alpha(conics[idx], x, y);
    if (raw < settings.min_alpha)
      continue;
    const double a = std::min(settings.max_alpha, raw);
    const double w = a * t;
    const auto &p = splats[idx].payload;
    for (int c = 0; c < channel::kCount; ++c)
      accum[c] += w * p[c];
    t *= 1.0 - a;
    if (t < settings.min_transmittance)
      break;
  }
  transmittance = t;
}

std::vector<detail::ConicSplat> conics_of(std::span<const Splat> splats) {
  std::vector<detail::ConicSplat> conics(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i)
    conics[i] = detail::to_conic(splats[i]);
  return conics;
}

} // namespace

RenderOutputs rasterize_forward(std::span<const Splat> splats, const CameraFrame &cam, const RasterSettings &settings) {
  const int w = cam.width(), h = cam.height();
  RenderOutputs out(w, h);
  const detail::RasterPlan plan = detail::build_plan(splats, w, h, settings);
  const std::vector<detail::ConicSplat> conics = conics_of(splats);
  const int ntiles = plan.tiles_x * plan.tiles_y;
  const int ts = plan.tile_size;

#pragma omp parallel for schedule(dynamic, 1)
  for (int tile = 0; tile < ntiles; ++tile) {
    const int tx = tile % plan.tiles_x, ty = tile / plan.tiles_x;
    const auto &list = plan.tiles[tile];
    for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y)
      for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
        double tr = 1.0;
        composite_pixel(splats, conics, list, x, y, settings, &out.channels.at(x, y, 0), tr);
        out.transmittance.at(x, y) = tr;
        out.alpha.at(x, y) = 1.0 - tr;
      }
  }
  return out;
}

void for_each_contribution(std::span<const Splat> splats, const CameraFrame &cam, const RasterSettings &settings,
                           const std::function<void(int, int, std::span<const Contribution>)> &visit) {
  const int w = cam.width(), h = cam.height();
  const detail::RasterPlan plan = detail::build_plan(splats, w, h, settings);
  const std::vector<detail::ConicSplat> conics = conics_of(splats);
  const int ts = plan.tile_size;
  std::vector<Contribution> hits;
  for (int tile = 0; tile < plan.tiles_x * plan.tiles_y; ++tile) {
    const int tx = tile % plan.tiles_x, ty = tile / plan.tiles_x;
    for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y)
      for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
        hits.clear();
        double t = 1.0;
        for (std::uint32_t idx : plan.tiles[tile]) {
          const double raw = detail::raw_alpha(conics[idx], x, y);
          if (raw < settings.min_alpha)
            continue;
          const double a = std::min(settings.max_alpha, raw);
          hits.push_back({idx, a * t});
          t *= 1.0 - a;
          if (t < settings.min_transmittance)
            break;
        }
        visit(x, y, hits);
      }
  }
}

} // namespace dynsplat
