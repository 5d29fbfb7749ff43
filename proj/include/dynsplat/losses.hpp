// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/primitives.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace dynsplat {

struct LossWeights {
  double lambda_ssim = 0.1;
  double lambda_alpha = 0.5;
  double lambda_depth = 0.05;
  double lambda_normal = 0.05;
  double lambda_track = 2.0;
  double lambda_flow = 0.01;
  double lambda_beta = 0.5;
  double lambda_s = 0.5;
};

/// Raw terms and their weights; total is the weighted sum.
struct LossReport {
  std::map<std::string, double> terms;
  std::map<std::string, double> weights;
  double total = 0.0;

  void add(const std::string &name, double value, double weight);
};

constexpr double kBceClamp = 1e-6;
constexpr double kPsnrSentinel = 99.0;

/// Scalar loss with its adjoint image.
struct ImageLoss {
  double value = 0.0;
  ImageD grad;
};

// ---- SSIM -------------------------------------------------------------------------------------

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5; windows are truncated at the border and
/// renormalized). `region`, if given, restricts the mean to its nonzero pixels.
double ssim(const ImageD &a, const ImageD &b, const Mask *region = nullptr);

/// SSIM together with d SSIM / d a.
ImageLoss ssim_with_grad(const ImageD &a, const ImageD &b, const Mask *region = nullptr);

// ---- training losses --------------------------------------------------------------------------

struct PhotometricLoss {
  double l1 = 0.0;
  double dssim = 0.0;
  double bce = 0.0;
  double total = 0.0;
  ImageD grad_color; ///< d total / d pred
  ImageD grad_mask;  ///< d total / d pred_mask (empty when no mask term)
};

/// (1 - lambda_ssim) L1 + lambda_ssim (1 - SSIM) + lambda_alpha BCE(pred_mask, gt_mask).
/// Pass empty masks to drop the BCE term; `region` restricts L1/SSIM to its pixels.
PhotometricLoss photometric_loss(const ImageD &pred, const ImageD &gt, const ImageD &pred_mask, const Mask &gt_mask,
                                 const LossWeights &weights, const Mask *region = nullptr);

/// Mean binary cross-entropy with the prediction clamped to [1e-6, 1 - 1e-6].
ImageLoss bce_loss(const ImageD &pred, const Mask &target);

/// Mean L1 over all channels of pixels in `region` (all pixels when null).
ImageLoss l1_loss(const ImageD &pred, const ImageD &gt, const Mask *region = nullptr);

/// Median / mean-absolute-deviation normalized L1 between depth maps over `valid`.
ImageLoss depth_loss(const ImageD &pred, const ImageD &gt, const Mask &valid);

/// Mean (1 - n_pred . n_gt)^2 over `valid`; predictions are renormalized.
ImageLoss normal_loss(const ImageD &pred, const ImageD &gt, const Mask &valid);

struct TrackSample {
  int x = 0;
  int y = 0;
  Vec3 target = Vec3::Zero();
};

/// Mean per-sample L1 distance between rendered correspondences and lifted track targets,
/// over samples with alpha > 0.5.
ImageLoss track_loss(const ImageD &pred_corr, std::span<const TrackSample> samples, const ImageD &alpha);

struct FlowLoss {
  double value = 0.0;
  ImageD grad_fwd;
  ImageD grad_bwd;
};

/// Masked mean L1 of forward plus backward velocities; masks may differ per direction.
FlowLoss flow_loss(const ImageD &pred_fwd, const ImageD &pred_bwd, const ImageD &gt_fwd, const ImageD &gt_bwd,
                   const Mask &mask_fwd, const Mask &mask_bwd);

/// Gradient of reg_loss in parameter-shaped buffers (only beta and log_scale entries are set).
struct RegGrad {
  std::vector<double> rigid_beta;
  std::vector<Vec3> rigid_log_scale;
  std::vector<Vec3> transient_log_scale;
};

/// (1/N) sum over rigid and transient Gaussians of lambda_beta / beta (rigid only) + lambda_s var(scale).
double reg_loss(const GaussianSet &set, const LossWeights &weights, RegGrad *grad = nullptr);

// ---- metrics ----------------------------------------------------------------------------------

double mse(const ImageD &a, const ImageD &b, const Mask *region = nullptr);
/// -10 log10(MSE); 99 when MSE < 1e-12.
double psnr(const ImageD &pred, const ImageD &gt, const Mask *region = nullptr);

} // namespace dynsplat
