// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/losses.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

using namespace dynsplat;
using dynsplat::testing::Rng;

namespace {

ImageD random_image(Rng &rng, int w, int h, int c, double lo = 0.0, double hi = 1.0) {
  ImageD im(w, h, c);
  for (auto &v : im.data)
    v = rng.uniform(lo, hi);
  return im;
}

Mask random_mask(Rng &rng, int w, int h, double p_one) {
  Mask m(w, h, 1);
  for (auto &v : m.data)
    v = rng.uniform() < p_one;
  return m;
}

/// Direct evaluation of windowed SSIM: truncated 11x11 Gaussian, renormalized, channel-averaged.
double ssim_oracle(const ImageD &a, const ImageD &b, const Mask *region) {
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (region && !region->at(x, y))
        continue;
      for (int c = 0; c < a.channels; ++c) {
        double ws = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -5; dy <= 5; ++dy)
          for (int dx = -5; dx <= 5; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= a.width || yy >= a.height)
              continue;
            const double w = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
            const double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
            ws += w;
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        ma /= ws;
        mb /= ws;
        const double va = saa / ws - ma * ma, vb = sbb / ws - mb * mb, cov = sab / ws - ma * mb;
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  return count ? total / count : 0.0;
}

/// Worst relative error of an analytic image adjoint against central differences.
double fd_check(ImageD &x, const ImageD &grad, const std::function<double()> &f, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    const double keep = x.data[k];
    x.data[k] = keep + h;
    const double up = f();
    x.data[k] = keep - h;
    const double down = f();
    x.data[k] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad.data[k]) / std::max(1e-4, std::abs(fd)));
  }
  return worst;
}

double robust_normalized_l1(std::vector<double> p, std::vector<double> g) {
  auto normalize = [](std::vector<double> v) {
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double med = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    double mad = 0;
    for (double x : v)
      mad += std::abs(x - med) / n;
    for (double &x : v)
      x = (x - med) / mad;
    return v;
  };
  p = normalize(p);
  g = normalize(g);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    s += std::abs(p[i] - g[i]) / p.size();
  return s;
}

ImageD row_image(const std::vector<double> &v) {
  ImageD im(static_cast<int>(v.size()), 1, 1);
  im.data = v;
  return im;
}

} // namespace

TEST(LossWeights, Defaults) {
  const LossWeights w;
  EXPECT_EQ(w.lambda_ssim, 0.1);
  EXPECT_EQ(w.lambda_alpha, 0.5);
  EXPECT_EQ(w.lambda_depth, 0.05);
  EXPECT_EQ(w.lambda_normal, 0.05);
  EXPECT_EQ(w.lambda_track, 2.0);
  EXPECT_EQ(w.lambda_flow, 0.01);
  EXPECT_EQ(w.lambda_beta, 0.5);
  EXPECT_EQ(w.lambda_s, 0.5);
}

TEST(PhotometricLoss, ExactPredictionHitsClampFloor) {
  Rng rng(51);
  const ImageD img = random_image(rng, 12, 10, 3);
  const Mask gt_mask = random_mask(rng, 12, 10, 0.4);
  ImageD pred_mask(12, 10, 1);
  for (std::size_t i = 0; i < gt_mask.data.size(); ++i)
    pred_mask.data[i] = gt_mask.data[i];
  const LossWeights w;
  const PhotometricLoss l = photometric_loss(img, img, pred_mask, gt_mask, w);
  EXPECT_EQ(l.l1, 0.0);
  EXPECT_NEAR(l.dssim, 0.0, 1e-12);
  EXPECT_NEAR(l.bce, -std::log(1.0 - 1e-6), 1e-15);
  EXPECT_LE(l.total, 1.4e-5 * w.lambda_alpha);
}

TEST(PhotometricLoss, ConstantOffsetL1) {
  Rng rng(52);
  const ImageD gt = random_image(rng, 12, 12, 3, 0.0, 0.8);
  ImageD pred = gt;
  for (auto &v : pred.data)
    v += 0.1;
  LossWeights w;
  const PhotometricLoss l = photometric_loss(pred, gt, {}, {}, w);
  EXPECT_NEAR((1.0 - w.lambda_ssim) * l.l1, 0.09, 1e-12);
  EXPECT_TRUE(l.grad_mask.empty());
}

TEST(PhotometricLoss, InvertedMaskBce) {
  Mask gt(4, 4, 1);
  ImageD pred(4, 4, 1);
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    gt.data[i] = i % 3 == 0;
    pred.data[i] = gt.data[i] ? 0.0 : 1.0;
  }
  EXPECT_NEAR(bce_loss(pred, gt).value, 13.815510557964274, 1e-9);
}

TEST(Ssim, Examples) {
  Rng rng(53);
  const ImageD a = random_image(rng, 14, 14, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  const ImageD zero(9, 9, 1, 0.0), one(9, 9, 1, 1.0);
  EXPECT_NEAR(ssim(zero, one), 1e-4 / (1.0 + 1e-4), 1e-15);
}

TEST(Ssim, MatchesDirectEvaluationAndIsSymmetric) {
  Rng rng(54);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = rng.integer(1, 14), h = rng.integer(1, 14), c = rng.integer(1, 3);
    const ImageD a = random_image(rng, w, h, c), b = random_image(rng, w, h, c);
    const Mask region = random_mask(rng, w, h, 0.7);
    const bool use_region = rng.uniform() < 0.5;
    const double s = ssim(a, b, use_region ? &region : nullptr);
    ASSERT_NEAR(s, ssim_oracle(a, b, use_region ? &region : nullptr), 1e-10);
    ASSERT_NEAR(s, ssim(b, a, use_region ? &region : nullptr), 1e-12);
    ASSERT_GE(s, -1.0 - 1e-12);
    ASSERT_LE(s, 1.0 + 1e-12);
  }
}

TEST(DepthLoss, Examples) {
  const Mask all(3, 1, 1, 1);
  EXPECT_NEAR(depth_loss(row_image({1, 2, 4}), row_image({1, 2, 3}), all).value,
              robust_normalized_l1({1, 2, 4}, {1, 2, 3}), 1e-15);
  EXPECT_NEAR(depth_loss(row_image({1, 2, 4}), row_image({1, 2, 3}), all).value, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(depth_loss(row_image({5, 5, 5}), row_image({1, 2, 3}), all).value, 0.0);
}

TEST(DepthLoss, AffineInvariance) {
  Rng rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageD gt = random_image(rng, 8, 8, 1, 1.0, 10.0);
    const Mask valid = random_mask(rng, 8, 8, 0.8);
    const double a = rng.uniform(0.5, 2.0), b = rng.uniform(-1.0, 1.0);
    ImageD pred = gt;
    for (auto &v : pred.data)
      v = a * v + b;
    ASSERT_LE(depth_loss(pred, gt, valid).value, 1e-6);
  }
}

TEST(DepthLoss, MatchesDirectNormalization) {
  Rng rng(56);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.integer(2, 30);
    std::vector<double> p(n), g(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng.uniform(1, 5);
      g[i] = rng.uniform(1, 5);
    }
    ASSERT_NEAR(depth_loss(row_image(p), row_image(g), Mask(n, 1, 1, 1)).value, robust_normalized_l1(p, g), 1e-12);
  }
}

TEST(NormalLoss, Examples) {
  ImageD a(1, 1, 3), b(1, 1, 3);
  const Mask m(1, 1, 1, 1);
  a.data = {0, 0, 1};
  b.data = {0, 0, 2};
  EXPECT_NEAR(normal_loss(a, b, m).value, 0.0, 1e-15);
  b.data = {1, 0, 0};
  EXPECT_NEAR(normal_loss(a, b, m).value, 1.0, 1e-15);
  b.data = {0, 0, -1};
  EXPECT_NEAR(normal_loss(a, b, m).value, 4.0, 1e-15);
}

TEST(TrackLoss, Examples) {
  ImageD corr(4, 4, 3), alpha(4, 4, 1, 1.0);
  Rng rng(57);
  for (auto &v : corr.data)
    v = rng.uniform(-1, 1);
  std::vector<TrackSample> s;
  for (int i = 0; i < 5; ++i) {
    const int x = rng.integer(0, 3), y = rng.integer(0, 3);
    s.push_back({x, y, Vec3(corr.at(x, y, 0), corr.at(x, y, 1), corr.at(x, y, 2))});
  }
  EXPECT_EQ(track_loss(corr, s, alpha).value, 0.0);
  for (auto &t : s)
    t.target.x() -= 1.0;
  EXPECT_NEAR(track_loss(corr, s, alpha).value, 1.0, 1e-12);
  // A sample on a thin pixel is dropped; the rest still average to 1.
  alpha.at(s[0].x, s[0].y) = 0.5;
  s[0].target.x() -= 100.0;
  const bool others_remain = std::any_of(s.begin() + 1, s.end(), [&](const TrackSample &t) {
    return alpha.at(t.x, t.y) > 0.5;
  });
  EXPECT_NEAR(track_loss(corr, s, alpha).value, others_remain ? 1.0 : 0.0, 1e-12);
}

TEST(FlowLoss, Examples) {
  Rng rng(58);
  const ImageD gf = random_image(rng, 5, 5, 3), gb = random_image(rng, 5, 5, 3);
  const Mask full(5, 5, 1, 1), none(5, 5, 1, 0);
  EXPECT_EQ(flow_loss(gf, gb, gf, gb, full, full).value, 0.0);
  ImageD pf = gf;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      pf.at(x, y, 0) += 1.0;
  EXPECT_NEAR(flow_loss(pf, gb, gf, gb, full, full).value, 1.0, 1e-12);
  EXPECT_EQ(flow_loss(pf, gb, gf, gb, none, none).value, 0.0);
}

TEST(RegLoss, Examples) {
  GaussianSet set;
  set.bases = identity_bases(1, 2);
  RigidGaussian g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.beta = 1.0;
  g.log_scale = Vec3::Constant(-2.0);
  set.rigids.push_back(g);
  const LossWeights w;
  EXPECT_NEAR(reg_loss(set, w), 0.5, 1e-15);
  TransientGaussian tg;
  tg.log_scale = Vec3::Constant(-1.0);
  set.transients.push_back(tg);
  EXPECT_NEAR(reg_loss(set, w), 0.25, 1e-15);
  double prev = reg_loss(set, w);
  for (double beta = 2.0; beta < 1e6; beta *= 3.0) {
    set.rigids[0].beta = beta;
    const double r = reg_loss(set, w);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Psnr, Examples) {
  ImageD a(4, 4, 3, 0.5);
  EXPECT_EQ(psnr(a, a), 99.0);
  ImageD b = a;
  for (auto &v : b.data)
    v += 0.1;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_NEAR(psnr(ImageD(4, 4, 3, 0.0), ImageD(4, 4, 3, 1.0)), 0.0, 1e-12);
}

TEST(LossReport, TotalIsWeightedSum) {
  Rng rng(59);
  const char *names[] = {"photo", "ssim", "mask", "depth", "normal", "track", "flow", "reg"};
  for (int trial = 0; trial < 1000; ++trial) {
    LossReport r;
    double expect = 0.0;
    for (const char *n : names) {
      const double v = rng.uniform(0, 10), w = rng.uniform(0, 3);
      r.add(n, v, w);
      expect += v * w;
    }
    ASSERT_NEAR(r.total, expect, 1e-9);
  }
}

TEST(LossProperties, NonNegativeAndZeroOnExact) {
  Rng rng(60);
  const LossWeights w;
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageD a = random_image(rng, 8, 8, 3), b = random_image(rng, 8, 8, 3);
    const Mask m = random_mask(rng, 8, 8, 0.6);
    ASSERT_GE(photometric_loss(a, b, {}, {}, w).total, 0.0);
    ASSERT_NEAR(photometric_loss(a, a, {}, {}, w).total, 0.0, 1e-12);
    ASSERT_GE(normal_loss(a, b, m).value, 0.0);
    ASSERT_NEAR(normal_loss(a, a, m).value, 0.0, 1e-12);
    ASSERT_GE(flow_loss(a, b, b, a, m, m).value, 0.0);
    ASSERT_EQ(flow_loss(a, b, a, b, m, m).value, 0.0);
    const ImageD da = random_image(rng, 8, 8, 1, 1, 5), db = random_image(rng, 8, 8, 1, 1, 5);
    ASSERT_GE(depth_loss(da, db, m).value, 0.0);
    ASSERT_EQ(depth_loss(da, da, m).value, 0.0);
  }
}

TEST(LossAdjoints, FiniteDifferences) {
  Rng rng(61);
  const LossWeights w;
  for (int trial = 0; trial < 5; ++trial) {
    const Mask region = random_mask(rng, 8, 8, 0.7);
    ImageD pred = random_image(rng, 8, 8, 3), gt = random_image(rng, 8, 8, 3);
    ImageD pm = random_image(rng, 8, 8, 1, 0.05, 0.95);
    const Mask gm = random_mask(rng, 8, 8, 0.5);

    const PhotometricLoss p = photometric_loss(pred, gt, pm, gm, w, &region);
    EXPECT_LE(fd_check(pred, p.grad_color, [&] { return photometric_loss(pred, gt, pm, gm, w, &region).total; }), 1e-3);
    EXPECT_LE(fd_check(pm, p.grad_mask, [&] { return photometric_loss(pred, gt, pm, gm, w, &region).total; }), 1e-3);

    const ImageLoss s = ssim_with_grad(pred, gt);
    EXPECT_LE(fd_check(pred, s.grad, [&] { return ssim(pred, gt); }), 1e-3);

    ImageD dp = random_image(rng, 8, 8, 1, 1, 5);
    const ImageD dg = random_image(rng, 8, 8, 1, 1, 5);
    const ImageLoss d = depth_loss(dp, dg, region);
    EXPECT_LE(fd_check(dp, d.grad, [&] { return depth_loss(dp, dg, region).value; }, 1e-8), 1e-3);

    ImageD np = random_image(rng, 8, 8, 3, -1, 1);
    const ImageD ng = random_image(rng, 8, 8, 3, -1, 1);
    const ImageLoss n = normal_loss(np, ng, region);
    EXPECT_LE(fd_check(np, n.grad, [&] { return normal_loss(np, ng, region).value; }), 1e-3);

    ImageD corr = random_image(rng, 8, 8, 3, -1, 1);
    const ImageD alpha = random_image(rng, 8, 8, 1);
    std::vector<TrackSample> samples;
    for (int i = 0; i < 12; ++i)
      samples.push_back({rng.integer(0, 7), rng.integer(0, 7), rng.vec3(-1, 1)});
    const ImageLoss t = track_loss(corr, samples, alpha);
    EXPECT_LE(fd_check(corr, t.grad, [&] { return track_loss(corr, samples, alpha).value; }), 1e-3);

    ImageD vf = random_image(rng, 8, 8, 3, -1, 1), vb = random_image(rng, 8, 8, 3, -1, 1);
    const ImageD gf = random_image(rng, 8, 8, 3, -1, 1), gb = random_image(rng, 8, 8, 3, -1, 1);
    const Mask mb = random_mask(rng, 8, 8, 0.5);
    const FlowLoss f = flow_loss(vf, vb, gf, gb, region, mb);
    EXPECT_LE(fd_check(vf, f.grad_fwd, [&] { return flow_loss(vf, vb, gf, gb, region, mb).value; }), 1e-3);
    EXPECT_LE(fd_check(vb, f.grad_bwd, [&] { return flow_loss(vf, vb, gf, gb, region, mb).value; }), 1e-3);
  }
}

TEST(LossAdjoints, RegularizerFiniteDifferences) {
  Rng rng(62);
  const LossWeights w;
  GaussianSet set = dynsplat::testing::random_set(rng, {});
  RegGrad g;
  reg_loss(set, w, &g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < set.rigids.size(); ++i) {
    double &beta = set.rigids[i].beta;
    const double keep = beta;
    beta = keep + h;
    const double up = reg_loss(set, w);
    beta = keep - h;
    const double down = reg_loss(set, w);
    beta = keep;
    EXPECT_NEAR((up - down) / (2 * h), g.rigid_beta[i], 1e-6);
    for (int c = 0; c < 3; ++c) {
      double &s = set.rigids[i].log_scale[c];
      const double k = s;
      s = k + h;
      const double u2 = reg_loss(set, w);
      s = k - h;
      const double d2 = reg_loss(set, w);
      s = k;
      EXPECT_NEAR((u2 - d2) / (2 * h), g.rigid_log_scale[i][c], 1e-6);
    }
  }
  for (std::size_t i = 0; i < set.transients.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      double &s = set.transients[i].log_scale[c];
      const double k = s;
      s = k + h;
      const double u2 = reg_loss(set, w);
      s = k - h;
      const double d2 = reg_loss(set, w);
      s = k;
      EXPECT_NEAR((u2 - d2) / (2 * h), g.transient_log_scale[i][c], 1e-6);
    }
}
