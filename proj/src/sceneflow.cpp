// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/sceneflow.hpp"

#include <cmath>

namespace dynsplat {

bool depth_is_valid(double d) { return std::isfinite(d) && d > kMinValidDepth && d < kMaxValidDepth; }

Mask depth_valid_mask(const ImageD &depth) {
  Mask m(depth.width, depth.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = depth_is_valid(depth.data[i * depth.channels]);
  return m;
}

ImageD unproject_all(const ImageD &depth, const CameraFrame &cam) {
  if (!depth.same_shape(cam.width(), cam.height()))
    throw ShapeMismatch("unproject_all: depth does not match the camera");
  ImageD pts(depth.width, depth.height, 3);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      const double d = depth.at(x, y);
      if (!depth_is_valid(d))
        continue;
      const Vec3 p = unproject(Vec2(x, y), d, cam);
      for (int c = 0; c < 3; ++c)
        pts.at(x, y, c) = p[c];
    }
  return pts;
}

namespace {

/// Every pixel touched by the bilinear stencil at (sx, sy) has valid depth.
bool taps_valid(const Mask &valid, double sx, double sy) {
  const int w = valid.width, h = valid.height;
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(static_cast<int>(std::ceil(sx)), w - 1);
  const int y1 = std::min(static_cast<int>(std::ceil(sy)), h - 1);
  return valid.at(x0, y0) && valid.at(x1, y0) && valid.at(x0, y1) && valid.at(x1, y1);
}

/// Samples the other frame's point map at p + flow(p); sign = +1 gives other - here, -1 gives here - other.
SceneFlowResult lift(const ImageD &depth_here, const ImageD &depth_other, const ImageD &flow,
                     const CameraFrame &cam_here, const CameraFrame &cam_other, double sign) {
  if (!depth_here.same_shape(depth_other) || !depth_here.same_shape(flow) || flow.channels != 2)
    throw ShapeMismatch("scene flow: depth and flow shapes differ");
  const ImageD here = unproject_all(depth_here, cam_here);
  const ImageD other = unproject_all(depth_other, cam_other);
  const Mask other_valid = depth_valid_mask(depth_other);
  const WarpResult warped = warp(other, flow);
  SceneFlowResult r{ImageD(flow.width, flow.height, 3), Mask(flow.width, flow.height, 1)};
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      if (!warped.valid.at(x, y))
        continue;
      const double sx = x + flow.at(x, y, 0), sy = y + flow.at(x, y, 1);
      r.warped_valid.at(x, y) = taps_valid(other_valid, sx, sy);
      for (int c = 0; c < 3; ++c)
        r.flow.at(x, y, c) = sign * (warped.values.at(x, y, c) - here.at(x, y, c));
    }
  return r;
}

} // namespace

SceneFlowResult forward_scene_flow(const ImageD &depth_t, const ImageD &depth_next, const ImageD &flow_fwd,
                                   const CameraFrame &cam_t, const CameraFrame &cam_next) {
  return lift(depth_t, depth_next, flow_fwd, cam_t, cam_next, 1.0);
}

SceneFlowResult backward_scene_flow(const ImageD &depth_t, const ImageD &depth_prev, const ImageD &flow_bwd,
                                    const CameraFrame &cam_t, const CameraFrame &cam_prev) {
  return lift(depth_t, depth_prev, flow_bwd, cam_t, cam_prev, -1.0);
}

Mask scene_flow_mask(const Mask &dyn, const Mask &depth_valid, const Mask &warped_depth_valid,
                     const Mask &flow_nonoccluded) {
  if (!dyn.same_shape(depth_valid) || !dyn.same_shape(warped_depth_valid) || !dyn.same_shape(flow_nonoccluded))
    throw ShapeMismatch("scene_flow_mask: mask shapes differ");
  Mask out(dyn.width, dyn.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = dyn.data[i] && depth_valid.data[i] && warped_depth_valid.data[i] && flow_nonoccluded.data[i];
  return out;
}

} // namespace dynsplat
