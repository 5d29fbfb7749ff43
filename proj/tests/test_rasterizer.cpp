// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/rasterizer.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace dynsplat;
using dynsplat::testing::make_camera;
using dynsplat::testing::max_abs_diff;
using dynsplat::testing::Rng;

namespace {

Splat centered_splat(const CameraFrame &cam, double opacity, const Vec3 &color, double depth, std::uint32_t index) {
  Splat s;
  s.mean2d = Vec2(cam.intrinsics.cx, cam.intrinsics.cy);
  s.cov2d = Mat2::Identity() * 4.0;
  s.opacity = opacity;
  s.depth = depth;
  s.payload[channel::kColor] = color.x();
  s.payload[channel::kColor + 1] = color.y();
  s.payload[channel::kColor + 2] = color.z();
  s.index = index;
  return s;
}

StaticGaussian static_at(const Vec3 &mean, double scale, double opacity) {
  StaticGaussian g;
  g.mean = mean;
  g.log_scale = Vec3::Constant(std::log(scale));
  g.opacity_logit = logit(opacity);
  g.color = Vec3(0.2, 0.4, 0.6);
  return g;
}

} // namespace

TEST(PrepareSplats, EmptySet) {
  GaussianSet set;
  set.bases = identity_bases(0, 3);
  EXPECT_TRUE(prepare_splats(set, make_camera(16, 16, 20.0), 1).empty());
}

TEST(PrepareSplats, GatedTailIsCulled) {
  GaussianSet set;
  set.bases = identity_bases(0, 31);
  TransientGaussian g;
  static_cast<StaticGaussian &>(g) = static_at(Vec3(0, 0, 4), 0.3, 0.9);
  g.beta = 2.0;
  g.gamma = 10.0;
  set.transients.push_back(g);
  const CameraFrame cam = make_camera(16, 16, 20.0);
  EXPECT_EQ(prepare_splats(set, cam, 10).size(), 1u);
  EXPECT_TRUE(prepare_splats(set, cam, 30).empty());
}

TEST(PrepareSplats, BehindCameraIsCulled) {
  GaussianSet set;
  set.bases = identity_bases(0, 1);
  set.statics.push_back(static_at(Vec3(0, 0, -2), 0.3, 0.9));
  set.statics.push_back(static_at(Vec3(0, 0, 0), 0.3, 0.9));
  EXPECT_TRUE(prepare_splats(set, make_camera(16, 16, 20.0), 0).empty());
}

TEST(PrepareSplats, FarOffImageIsCulled) {
  GaussianSet set;
  set.bases = identity_bases(0, 1);
  set.statics.push_back(static_at(Vec3(50, 0, 2), 0.01, 0.9));
  set.statics.push_back(static_at(Vec3(0, 0, 2), 0.01, 0.9));
  const std::vector<Splat> s = prepare_splats(set, make_camera(16, 16, 20.0), 0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].index, 1u);
}

TEST(PrepareSplats, NormalFacesCameraAlongThinAxis) {
  GaussianSet set;
  set.bases = identity_bases(0, 1);
  StaticGaussian g = static_at(Vec3(0, 0, 3), 0.2, 0.9);
  g.log_scale = Vec3(std::log(0.2), std::log(0.2), std::log(0.01));
  set.statics.push_back(g);
  const std::vector<Splat> s = prepare_splats(set, make_camera(16, 16, 20.0), 0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].payload[channel::kNormal + 2], -1.0, 1e-12);
  for (int c = channel::kVelFwd; c < channel::kCorr; ++c)
    EXPECT_EQ(s[0].payload[c], 0.0);
  EXPECT_EQ(s[0].payload[channel::kCorr + 2], 3.0);
}

TEST(RasterizeForward, SingleSplatAtCenter) {
  const CameraFrame cam = make_camera(17, 17, 20.0);
  const std::vector<Splat> s = {centered_splat(cam, 0.8, Vec3(0.3, 0.6, 0.9), 2.0, 0)};
  const RenderOutputs o = rasterize_forward(s, cam);
  EXPECT_NEAR(o.alpha.at(8, 8), 0.8, 1e-15);
  EXPECT_NEAR(o.channels.at(8, 8, 0), 0.8 * 0.3, 1e-15);
  EXPECT_NEAR(o.channels.at(8, 8, 1), 0.8 * 0.6, 1e-15);
  EXPECT_NEAR(o.channels.at(8, 8, 2), 0.8 * 0.9, 1e-15);
}

TEST(RasterizeForward, TwoCoincidentSplats) {
  const CameraFrame cam = make_camera(17, 17, 20.0);
  // Listed back first to check that sorting happens inside.
  const std::vector<Splat> s = {centered_splat(cam, 1.0, Vec3(0, 1, 0), 3.0, 0),
                                centered_splat(cam, 0.5, Vec3(1, 0, 0), 1.0, 1)};
  const RenderOutputs o = rasterize_forward(s, cam);
  // The back opacity clamps to 0.999.
  EXPECT_NEAR(o.channels.at(8, 8, 0), 0.5, 1e-15);
  EXPECT_NEAR(o.channels.at(8, 8, 1), 0.5 * 0.999, 1e-15);
  EXPECT_NEAR(o.channels.at(8, 8, 2), 0.0, 1e-15);
}

TEST(RasterizeForward, NoSplatsIsBlank) {
  const CameraFrame cam = make_camera(20, 9, 10.0);
  const RenderOutputs o = rasterize_forward({}, cam);
  for (double v : o.channels.data)
    EXPECT_EQ(v, 0.0);
  for (double v : o.alpha.data)
    EXPECT_EQ(v, 0.0);
  for (double v : o.transmittance.data)
    EXPECT_EQ(v, 1.0);
}

TEST(RasterizeReference, MatchesTiledOnRandomScenes) {
  Rng rng(21);
  const CameraFrame cam = make_camera(32, 32, 30.0);
  for (int scene = 0; scene < 100; ++scene) {
    const std::vector<Splat> s = dynsplat::testing::random_splats(rng, 50, 32, 32, 0.6);
    const RenderOutputs a = rasterize_forward(s, cam), b = rasterize_reference(s, cam);
    ASSERT_LE(max_abs_diff(a.channels, b.channels), 1e-5) << scene;
    ASSERT_LE(max_abs_diff(a.alpha, b.alpha), 1e-5) << scene;
  }
}

TEST(RasterizeReference, StackedOpaqueSplats) {
  const CameraFrame cam = make_camera(32, 32, 30.0);
  std::vector<Splat> s;
  Rng rng(22);
  for (int i = 0; i < 200; ++i) {
    Splat sp = centered_splat(cam, 0.99, rng.vec3(0, 1), 1.0 + i * 0.01, static_cast<std::uint32_t>(i));
    sp.cov2d = Mat2::Identity() * 60.0;
    s.push_back(sp);
  }
  const RenderOutputs a = rasterize_forward(s, cam), b = rasterize_reference(s, cam);
  EXPECT_LE(max_abs_diff(a.channels, b.channels), 1e-4);
  EXPECT_LE(max_abs_diff(a.alpha, b.alpha), 1e-4);
}

TEST(RasterizeForward, TieBreakByIndexIsDeterministic) {
  const CameraFrame cam = make_camera(17, 17, 20.0);
  std::vector<Splat> s = {centered_splat(cam, 0.5, Vec3(1, 0, 0), 2.0, 0),
                          centered_splat(cam, 0.5, Vec3(0, 1, 0), 2.0, 1)};
  const RenderOutputs a = rasterize_forward(s, cam);
  std::swap(s[0], s[1]);
  s[0].index = 0;
  s[1].index = 1;
  const RenderOutputs b = rasterize_forward(s, cam);
  // Index 0 is composited first in both cases, and it is red first, green second.
  EXPECT_NEAR(a.channels.at(8, 8, 0), 0.5, 1e-15);
  EXPECT_NEAR(b.channels.at(8, 8, 1), 0.5, 1e-15);
}

TEST(RasterizeForward, AlphaMonotoneInOpacity) {
  Rng rng(23);
  const CameraFrame cam = make_camera(24, 24, 20.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Splat> s = dynsplat::testing::random_splats(rng, rng.integer(1, 12), 24, 24, 0.8);
    const RenderOutputs a = rasterize_forward(s, cam);
    Splat &pick = s[rng.integer(0, static_cast<int>(s.size()) - 1)];
    pick.opacity = std::min(0.999, pick.opacity + rng.uniform(0.0, 0.2));
    const RenderOutputs b = rasterize_forward(s, cam);
    for (std::size_t i = 0; i < a.alpha.data.size(); ++i)
      ASSERT_GE(b.alpha.data[i], a.alpha.data[i] - 1e-12);
  }
}

TEST(RasterizeForward, CompositingWeightsBounded) {
  Rng rng(24);
  const CameraFrame cam = make_camera(32, 32, 20.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<Splat> s = dynsplat::testing::random_splats(rng, rng.integer(1, 30), 32, 32, 0.99);
    bool ok = true;
    for_each_contribution(s, cam, {}, [&](int, int, std::span<const Contribution> list) {
      double sum = 0.0;
      for (const Contribution &c : list) {
        ok = ok && c.weight >= 0.0;
        sum += c.weight;
      }
      ok = ok && sum <= 1.0 + 1e-12;
    });
    ASSERT_TRUE(ok);
  }
}

TEST(RasterizeForward, DynMaskChannelConvention) {
  Rng rng(25);
  const CameraFrame cam = make_camera(24, 24, 24.0);
  for (int trial = 0; trial < 20; ++trial) {
    dynsplat::testing::SceneShape shape;
    shape.rigids = shape.transients = 0;
    shape.statics = 8;
    const GaussianSet statics = dynsplat::testing::random_set(rng, shape);
    const RenderOutputs a = render(statics, cam, 2);
    for (std::size_t p = 0; p < a.alpha.data.size(); ++p)
      ASSERT_EQ(a.channels.data[p * channel::kCount + channel::kDynMask], 0.0);
    shape.statics = 0;
    shape.rigids = shape.transients = 4;
    const GaussianSet dynamic = dynsplat::testing::random_set(rng, shape);
    const RenderOutputs b = render(dynamic, cam, 2);
    for (std::size_t p = 0; p < b.alpha.data.size(); ++p)
      ASSERT_NEAR(b.channels.data[p * channel::kCount + channel::kDynMask], b.alpha.data[p], 1e-12);
  }
}

TEST(RasterizeForward, ThreadCountDoesNotChangeOutput) {
  Rng rng(26);
  const CameraFrame cam = make_camera(48, 40, 30.0);
  const std::vector<Splat> s = dynsplat::testing::random_splats(rng, 150, 48, 40, 0.7);
  const RenderOutputs a = rasterize_forward(s, cam);
  dynsplat::testing::SceneShape shape;
  GaussianSet set = dynsplat::testing::random_set(rng, shape);
  const std::vector<Splat> sp = prepare_splats(set, cam, 1, 3);
  const RenderOutputs fo = rasterize_forward(sp, cam);
  const RenderGrads adj = dynsplat::testing::random_adjoint(rng, 48, 40);
  const GradientBuffers g1 = rasterize_backward(sp, cam, fo, adj, set, 1, 3);
  for (int threads : {1, 3, 4}) {
    omp_set_num_threads(threads);
    const RenderOutputs b = rasterize_forward(s, cam);
    EXPECT_EQ(a.channels.data, b.channels.data);
    const GradientBuffers g2 = rasterize_backward(sp, cam, rasterize_forward(sp, cam), adj, set, 1, 3);
    for (std::size_t i = 0; i < g1.statics.size(); ++i)
      EXPECT_EQ(g1.statics[i].mean, g2.statics[i].mean);
    for (std::size_t i = 0; i < g1.basis_translation.size(); ++i)
      EXPECT_EQ(g1.basis_translation[i], g2.basis_translation[i]);
  }
  omp_set_num_threads(1);
}

TEST(RasterizeBackward, ZeroAdjointGivesZeroGradients) {
  Rng rng(27);
  const CameraFrame cam = make_camera(24, 24, 24.0);
  GaussianSet set = dynsplat::testing::random_set(rng, {});
  const std::vector<Splat> sp = prepare_splats(set, cam, 2, 4);
  const RenderOutputs o = rasterize_forward(sp, cam);
  const GradientBuffers g = rasterize_backward(sp, cam, o, RenderGrads(24, 24), set, 2, 4);
  for (const auto &s : g.statics)
    EXPECT_EQ(s.mean.norm() + s.color.norm() + std::abs(s.opacity_logit), 0.0);
  for (const auto &r : g.rigids)
    EXPECT_EQ(r.weights.norm() + std::abs(r.beta) + std::abs(r.gamma), 0.0);
  for (const auto &b : g.basis_rotation)
    EXPECT_EQ(b.norm(), 0.0);
}

TEST(RasterizeBackward, RedChannelAdjointIsAlpha) {
  GaussianSet set;
  set.bases = identity_bases(0, 1);
  set.statics.push_back(static_at(Vec3(0.05, -0.02, 3.0), 0.15, 0.7));
  const CameraFrame cam = make_camera(17, 17, 30.0);
  const std::vector<Splat> sp = prepare_splats(set, cam, 0);
  const RenderOutputs o = rasterize_forward(sp, cam);
  RenderGrads adj(17, 17);
  adj.channels.at(9, 8, channel::kColor) = 1.0;
  const GradientBuffers g = rasterize_backward(sp, cam, o, adj, set, 0);
  EXPECT_NEAR(g.statics[0].color.x(), o.alpha.at(9, 8), 1e-15);
  EXPECT_EQ(g.statics[0].color.y(), 0.0);
}

TEST(RasterizeBackward, MismatchedShapesThrow) {
  GaussianSet set;
  set.bases = identity_bases(0, 1);
  set.statics.push_back(static_at(Vec3(0, 0, 3.0), 0.15, 0.7));
  const CameraFrame cam = make_camera(17, 17, 30.0);
  const std::vector<Splat> sp = prepare_splats(set, cam, 0);
  const RenderOutputs o = rasterize_forward(sp, cam);
  EXPECT_THROW(rasterize_backward(sp, cam, o, RenderGrads(16, 17), set, 0), MismatchedForward);
}

TEST(RasterizeBackward, FiniteDifferenceOnMixedScene) {
  Rng rng(28);
  dynsplat::testing::SceneShape shape;
  shape.statics = 2;
  shape.rigids = 2;
  shape.transients = 1;
  GaussianSet set = dynsplat::testing::random_set(rng, shape);
  for (auto &g : set.rigids)
    g.gamma = 2.5;
  for (auto &g : set.transients)
    g.gamma = 2.5;
  const CameraFrame cam = make_camera(32, 32, 40.0, Eigen::AngleAxisd(0.05, Vec3(0.3, 1, 0).normalized()).toRotationMatrix(),
                                      Vec3(0.1, -0.05, 0.2));
  RasterSettings rs;
  rs.min_alpha = 1e-12;
  rs.cull_opacity = 1e-12;
  const auto r = dynsplat::testing::check_render_gradients(set, cam, 2, 4, rs,
                                                           dynsplat::testing::random_adjoint(rng, 32, 32));
  EXPECT_LE(r.worst, 1e-3) << r.worst_name;
  EXPECT_GT(r.checked, 100);
}
