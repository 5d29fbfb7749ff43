// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/losses.hpp"

#include <array>
#include <cmath>

namespace dynsplat {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kRadius + 1> gaussian_taps() {
  std::array<double, 2 * kRadius + 1> g{};
  for (int i = -kRadius; i <= kRadius; ++i)
    g[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
  return g;
}

/// Single-channel separable correlation with the truncated (unnormalized) window.
std::vector<double> blur(const std::vector<double> &src, int w, int h) {
  static const auto g = gaussian_taps();
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w)
          s += g[k + kRadius] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h)
          s += g[k + kRadius] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

std::vector<double> channel_of(const ImageD &img, int c) {
  std::vector<double> v(img.pixel_count());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = img.data[i * img.channels + c];
  return v;
}

struct SsimPass {
  double value = 0.0;
  ImageD grad;
};

SsimPass run(const ImageD &a, const ImageD &b, const Mask *region, bool want_grad) {
  if (!a.same_shape(b) || a.channels != b.channels)
    throw ShapeMismatch("ssim: image shapes differ");
  if (region && !region->same_shape(a))
    throw ShapeMismatch("ssim: region shape differs");
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  const std::vector<double> z = blur(std::vector<double>(n, 1.0), w, h);

  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    count += region ? (region->data[i] != 0) : 1;
  SsimPass out;
  if (want_grad)
    out.grad = ImageD(w, h, a.channels);
  if (count == 0)
    return out;
  const double scale = 1.0 / (static_cast<double>(count) * a.channels);

  for (int c = 0; c < a.channels; ++c) {
    const auto va = channel_of(a, c), vb = channel_of(b, c);
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
      aa[i] = va[i] * va[i];
      bb[i] = vb[i] * vb[i];
      ab[i] = va[i] * vb[i];
    }
    auto mu_a = blur(va, w, h), mu_b = blur(vb, w, h), s_aa = blur(aa, w, h), s_bb = blur(bb, w, h),
         s_ab = blur(ab, w, h);
    std::vector<double> ga(n), gb(n), gc(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ma = mu_a[i] / z[i], mb = mu_b[i] / z[i];
      const double var_a = s_aa[i] / z[i] - ma * ma;
      const double var_b = s_bb[i] / z[i] - mb * mb;
      const double cov = s_ab[i] / z[i] - ma * mb;
      const double n1 = 2.0 * ma * mb + kC1, n2 = 2.0 * cov + kC2;
      const double d1 = ma * ma + mb * mb + kC1, d2 = var_a + var_b + kC2;
      const double s = n1 * n2 / (d1 * d2);
      const double wgt = (region ? (region->data[i] != 0) : 1) * scale;
      out.value += wgt * s;
      if (!want_grad)
        continue;
      const double ds_dma = 2.0 * mb * n2 / (d1 * d2) - s * 2.0 * ma / d1;
      const double ds_dvar = -s / d2;
      const double ds_dcov = 2.0 * n1 / (d1 * d2);
      // d/da(q) = sum_p G(p,q) [A(p) + a(q) B(p) + b(q) C(p)], G row-normalized by z(p).
      ga[i] = wgt * (ds_dma - 2.0 * ma * ds_dvar - mb * ds_dcov) / z[i];
      gb[i] = wgt * 2.0 * ds_dvar / z[i];
      gc[i] = wgt * ds_dcov / z[i];
    }
    if (!want_grad)
      continue;
    const auto ta = blur(ga, w, h), tb = blur(gb, w, h), tc = blur(gc, w, h);
    for (std::size_t i = 0; i < n; ++i)
      out.grad.data[i * a.channels + c] = ta[i] + va[i] * tb[i] + vb[i] * tc[i];
  }
  return out;
}

} // namespace

double ssim(const ImageD &a, const ImageD &b, const Mask *region) { return run(a, b, region, false).value; }

ImageLoss ssim_with_grad(const ImageD &a, const ImageD &b, const Mask *region) {
  auto r = run(a, b, region, true);
  return {r.value, std::move(r.grad)};
}

} // namespace dynsplat
