// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/geometry.hpp"

namespace dynsplat {

constexpr double kMinValidDepth = 1e-4;
constexpr double kMaxValidDepth = 1e4;

/// Finite depth in (1e-4, 1e4).
bool depth_is_valid(double d);
Mask depth_valid_mask(const ImageD &depth);

/// World-space point of every pixel; invalid depths yield zeros.
ImageD unproject_all(const ImageD &depth, const CameraFrame &cam);

struct SceneFlowResult {
  ImageD flow;        ///< H x W x 3, world frame
  Mask warped_valid;  ///< sample inside the image and every bilinear tap has valid depth
};

/// warp(unproject(D_{t+1}), F_fwd) - unproject(D_t).
SceneFlowResult forward_scene_flow(const ImageD &depth_t, const ImageD &depth_next, const ImageD &flow_fwd,
                                   const CameraFrame &cam_t, const CameraFrame &cam_next);

/// unproject(D_t) - warp(unproject(D_{t-1}), F_bwd).
SceneFlowResult backward_scene_flow(const ImageD &depth_t, const ImageD &depth_prev, const ImageD &flow_bwd,
                                    const CameraFrame &cam_t, const CameraFrame &cam_prev);

/// Pixelwise AND.
Mask scene_flow_mask(const Mask &dyn, const Mask &depth_valid, const Mask &warped_depth_valid,
                     const Mask &flow_nonoccluded);

} // namespace dynsplat
