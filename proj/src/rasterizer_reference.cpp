// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynsplat {

RenderOutputs rasterize_reference(std::span<const Splat> splats, const CameraFrame &cam,
                                  const RasterSettings &settings) {
  const int w = cam.width(), h = cam.height();
  RenderOutputs out(w, h);

  std::vector<std::size_t> order(splats.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return splats[a].depth < splats[b].depth; });

  std::vector<Mat2> inverse(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i)
    inverse[i] = splats[i].cov2d.inverse();

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec2 p(x, y);
      double transmittance = 1.0;
      for (std::size_t i : order) {
        const Vec2 d = p - splats[i].mean2d;
        const double alpha = splats[i].opacity * std::exp(-0.5 * d.dot(inverse[i] * d));
        if (alpha < settings.min_alpha)
          continue;
        const double clamped = std::min(alpha, settings.max_alpha);
        for (int c = 0; c < channel::kCount; ++c)
          out.channels.at(x, y, c) += splats[i].payload[c] * clamped * transmittance;
        transmittance *= 1.0 - clamped;
      }
      out.transmittance.at(x, y) = transmittance;
      out.alpha.at(x, y) = 1.0 - transmittance;
    }
  return out;
}

} // namespace dynsplat
