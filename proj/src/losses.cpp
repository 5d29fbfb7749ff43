// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dynsplat {

void LossReport::add(const std::string &name, double value, double weight) {
  terms[name] = value;
  weights[name] = weight;
  total = 0.0;
  for (const auto &[k, v] : terms)
    total += weights[k] * v;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

bool in_region(const Mask *region, std::size_t i) { return !region || region->data[i] != 0; }

void require_same(const ImageD &a, const ImageD &b, const char *what) {
  if (!a.same_shape(b) || a.channels != b.channels)
    throw ShapeMismatch(std::string(what) + ": image shapes differ");
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

ImageLoss l1_loss(const ImageD &pred, const ImageD &gt, const Mask *region) {
  require_same(pred, gt, "l1_loss");
  ImageLoss out{0.0, ImageD(pred.width, pred.height, pred.channels)};
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i)
    count += in_region(region, i);
  if (count == 0)
    return out;
  const double inv = 1.0 / (static_cast<double>(count) * pred.channels);
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (!in_region(region, i))
      continue;
    for (int c = 0; c < pred.channels; ++c) {
      const std::size_t k = i * pred.channels + c;
      const double d = pred.data[k] - gt.data[k];
      out.value += std::abs(d) * inv;
      out.grad.data[k] = sign(d) * inv;
    }
  }
  return out;
}

ImageLoss bce_loss(const ImageD &pred, const Mask &target) {
  if (!pred.same_shape(target) || pred.channels != 1)
    throw ShapeMismatch("bce_loss: shapes differ");
  ImageLoss out{0.0, ImageD(pred.width, pred.height, 1)};
  const double inv = 1.0 / static_cast<double>(pred.pixel_count());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double raw = pred.data[i];
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const bool y = target.data[i] != 0;
    out.value += -(y ? std::log(p) : std::log(1.0 - p)) * inv;
    if (raw > kBceClamp && raw < 1.0 - kBceClamp)
      out.grad.data[i] = (y ? -1.0 / p : 1.0 / (1.0 - p)) * inv;
  }
  return out;
}

PhotometricLoss photometric_loss(const ImageD &pred, const ImageD &gt, const ImageD &pred_mask, const Mask &gt_mask,
                                 const LossWeights &weights, const Mask *region) {
  PhotometricLoss out;
  const ImageLoss l1 = l1_loss(pred, gt, region);
  const ImageLoss s = ssim_with_grad(pred, gt, region);
  out.l1 = l1.value;
  out.dssim = 1.0 - s.value;
  out.grad_color = ImageD(pred.width, pred.height, pred.channels);
  for (std::size_t k = 0; k < out.grad_color.data.size(); ++k)
    out.grad_color.data[k] = (1.0 - weights.lambda_ssim) * l1.grad.data[k] - weights.lambda_ssim * s.grad.data[k];
  out.total = (1.0 - weights.lambda_ssim) * out.l1 + weights.lambda_ssim * out.dssim;
  if (!pred_mask.empty() && !gt_mask.empty()) {
    ImageLoss b = bce_loss(pred_mask, gt_mask);
    out.bce = b.value;
    out.total += weights.lambda_alpha * b.value;
    for (auto &g : b.grad.data)
      g *= weights.lambda_alpha;
    out.grad_mask = std::move(b.grad);
  }
  return out;
}

ImageLoss depth_loss(const ImageD &pred, const ImageD &gt, const Mask &valid) {
  if (!pred.same_shape(gt) || !pred.same_shape(valid) || pred.channels != 1 || gt.channels != 1)
    throw ShapeMismatch("depth_loss: shapes differ");
  ImageLoss out{0.0, ImageD(pred.width, pred.height, 1)};
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < valid.data.size(); ++i)
    if (valid.data[i])
      idx.push_back(i);
  const std::size_t n = idx.size();
  if (n < 2)
    return out;

  std::vector<double> p(n), g(n);
  for (std::size_t k = 0; k < n; ++k) {
    p[k] = pred.data[idx[k]];
    g[k] = gt.data[idx[k]];
  }
  const double mp = median_of(p), mg = median_of(g);
  double sp = 0.0, sg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sp += std::abs(p[k] - mp);
    sg += std::abs(g[k] - mg);
  }
  sp /= static_cast<double>(n);
  sg /= static_cast<double>(n);
  if (sp < 1e-12 || sg < 1e-12)
    return out;

  std::vector<double> r(n), pn(n);
  double sum_r = 0.0, sum_rp = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    pn[k] = (p[k] - mp) / sp;
    const double d = pn[k] - (g[k] - mg) / sg;
    out.value += std::abs(d) / static_cast<double>(n);
    r[k] = sign(d) / static_cast<double>(n);
    sum_r += r[k];
    sum_rp += r[k] * pn[k];
  }

  // Median sensitivity: one middle element (odd n) or the two middles at 1/2 each (even n).
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k)
    order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b] || (p[a] == p[b] && a < b); });
  std::vector<double> dm(n, 0.0);
  if (n % 2) {
    dm[order[n / 2]] = 1.0;
  } else {
    dm[order[n / 2 - 1]] = 0.5;
    dm[order[n / 2]] = 0.5;
  }
  double sum_sign = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    sum_sign += sign(p[k] - mp);
  for (std::size_t j = 0; j < n; ++j) {
    const double ds = (sign(p[j] - mp) - sum_sign * dm[j]) / static_cast<double>(n);
    out.grad.data[idx[j]] = r[j] / sp - sum_r / sp * dm[j] - sum_rp / sp * ds;
  }
  return out;
}

ImageLoss normal_loss(const ImageD &pred, const ImageD &gt, const Mask &valid) {
  if (!pred.same_shape(gt) || !pred.same_shape(valid) || pred.channels != 3 || gt.channels != 3)
    throw ShapeMismatch("normal_loss: shapes differ");
  ImageLoss out{0.0, ImageD(pred.width, pred.height, 3)};
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < valid.data.size(); ++i) {
    if (!valid.data[i])
      continue;
    const Vec3 p(pred.data[3 * i], pred.data[3 * i + 1], pred.data[3 * i + 2]);
    const Vec3 g(gt.data[3 * i], gt.data[3 * i + 1], gt.data[3 * i + 2]);
    if (p.norm() > 1e-12 && g.norm() > 1e-12)
      used.push_back(i);
  }
  if (used.empty())
    return out;
  const double inv = 1.0 / static_cast<double>(used.size());
  for (std::size_t i : used) {
    const Vec3 p(pred.data[3 * i], pred.data[3 * i + 1], pred.data[3 * i + 2]);
    const Vec3 g = Vec3(gt.data[3 * i], gt.data[3 * i + 1], gt.data[3 * i + 2]).normalized();
    const double len = p.norm();
    const Vec3 n = p / len;
    const double e = 1.0 - n.dot(g);
    out.value += e * e * inv;
    const Vec3 dn = -2.0 * e * inv * g;
    const Vec3 dp = (dn - n * n.dot(dn)) / len;
    for (int c = 0; c < 3; ++c)
      out.grad.data[3 * i + c] = dp[c];
  }
  return out;
}

ImageLoss track_loss(const ImageD &pred_corr, std::span<const TrackSample> samples, const ImageD &alpha) {
  if (!pred_corr.same_shape(alpha) || pred_corr.channels != 3)
    throw ShapeMismatch("track_loss: shapes differ");
  ImageLoss out{0.0, ImageD(pred_corr.width, pred_corr.height, 3)};
  std::vector<const TrackSample *> used;
  for (const auto &s : samples) {
    if (s.x < 0 || s.y < 0 || s.x >= alpha.width || s.y >= alpha.height)
      continue;
    if (alpha.at(s.x, s.y) > 0.5)
      used.push_back(&s);
  }
  if (used.empty())
    return out;
  const double inv = 1.0 / static_cast<double>(used.size());
  for (const TrackSample *s : used)
    for (int c = 0; c < 3; ++c) {
      const double d = pred_corr.at(s->x, s->y, c) - s->target[c];
      out.value += std::abs(d) * inv;
      out.grad.at(s->x, s->y, c) += sign(d) * inv;
    }
  return out;
}

FlowLoss flow_loss(const ImageD &pred_fwd, const ImageD &pred_bwd, const ImageD &gt_fwd, const ImageD &gt_bwd,
                   const Mask &mask_fwd, const Mask &mask_bwd) {
  require_same(pred_fwd, gt_fwd, "flow_loss");
  require_same(pred_bwd, gt_bwd, "flow_loss");
  if (!pred_fwd.same_shape(mask_fwd) || !pred_bwd.same_shape(mask_bwd))
    throw ShapeMismatch("flow_loss: mask shapes differ");
  FlowLoss out;
  out.grad_fwd = ImageD(pred_fwd.width, pred_fwd.height, pred_fwd.channels);
  out.grad_bwd = ImageD(pred_bwd.width, pred_bwd.height, pred_bwd.channels);
  auto one = [&](const ImageD &p, const ImageD &g, const Mask &m, ImageD &grad) {
    std::size_t count = 0;
    for (auto v : m.data)
      count += v != 0;
    if (count == 0)
      return;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      if (!m.data[i])
        continue;
      for (int c = 0; c < p.channels; ++c) {
        const std::size_t k = i * p.channels + c;
        const double d = p.data[k] - g.data[k];
        out.value += std::abs(d) * inv;
        grad.data[k] = sign(d) * inv;
      }
    }
  };
  one(pred_fwd, gt_fwd, mask_fwd, out.grad_fwd);
  one(pred_bwd, gt_bwd, mask_bwd, out.grad_bwd);
  return out;
}

namespace {

/// Population variance of the three raw scales and its gradient w.r.t. the log-scales.
double scale_variance(const Vec3 &log_scale, Vec3 *grad_log_scale) {
  const Vec3 s = log_scale.array().exp();
  const double mean = s.mean();
  const Vec3 d = s.array() - mean;
  if (grad_log_scale)
    *grad_log_scale = (2.0 / 3.0) * d.cwiseProduct(s);
  return d.squaredNorm() / 3.0;
}

} // namespace

double reg_loss(const GaussianSet &set, const LossWeights &weights, RegGrad *grad) {
  const std::size_t n = set.rigids.size() + set.transients.size();
  if (grad) {
    grad->rigid_beta.assign(set.rigids.size(), 0.0);
    grad->rigid_log_scale.assign(set.rigids.size(), Vec3::Zero());
    grad->transient_log_scale.assign(set.transients.size(), Vec3::Zero());
  }
  if (n == 0)
    return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < set.rigids.size(); ++i) {
    const auto &g = set.rigids[i];
    if (!(g.beta > 0.0))
      throw ValidationError("reg_loss: beta must be positive");
    Vec3 gv;
    total += inv * (weights.lambda_beta / g.beta + weights.lambda_s * scale_variance(g.log_scale, &gv));
    if (grad) {
      grad->rigid_beta[i] = -inv * weights.lambda_beta / (g.beta * g.beta);
      grad->rigid_log_scale[i] = inv * weights.lambda_s * gv;
    }
  }
  for (std::size_t i = 0; i < set.transients.size(); ++i) {
    Vec3 gv;
    total += inv * weights.lambda_s * scale_variance(set.transients[i].log_scale, &gv);
    if (grad)
      grad->transient_log_scale[i] = inv * weights.lambda_s * gv;
  }
  return total;
}

double mse(const ImageD &a, const ImageD &b, const Mask *region) {
  require_same(a, b, "mse");
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    if (!in_region(region, i))
      continue;
    for (int c = 0; c < a.channels; ++c) {
      const double d = a.data[i * a.channels + c] - b.data[i * a.channels + c];
      s += d * d;
    }
    count += a.channels;
  }
  return count ? s / static_cast<double>(count) : 0.0;
}

double psnr(const ImageD &pred, const ImageD &gt, const Mask *region) {
  const double m = mse(pred, gt, region);
  return m < 1e-12 ? kPsnrSentinel : -10.0 * std::log10(m);
}

} // namespace dynsplat
