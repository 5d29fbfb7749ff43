// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/dataset.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dynsplat {

struct ViewMetrics {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvaluationReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  /// Per-frame IoU of the rendered dynamic mask (> 0.5) against ground-truth masks, when available.
  std::vector<double> mask_iou;
  std::optional<double> mean_mask_iou;

  std::string to_json() const;
};

/// Renders every view at its frame and scores it against the view's image.
EvaluationReport evaluate(const GaussianSet &set, const SceneDataset &ds, const std::vector<HeldOutView> &views);

/// Held-out views of the dataset, or its training views when it has none.
std::vector<HeldOutView> evaluation_views(const SceneDataset &ds);

} // namespace dynsplat
