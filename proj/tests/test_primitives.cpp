// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/checkpoint.hpp"
#include "dynsplat/primitives.hpp"
#include "dynsplat/rasterizer.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace dynsplat;
using dynsplat::testing::Rng;

namespace {

double sigmoid_oracle(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RigidGaussian rigid_at(const Vec3 &mean, int k) {
  RigidGaussian g;
  g.mean = mean;
  g.weights = Eigen::VectorXd::Zero(k);
  g.weights[0] = 1.0;
  return g;
}

} // namespace

TEST(Covariance, Examples) {
  EXPECT_LT((covariance_from(Vec3::Zero(), Vec4(1, 0, 0, 0)) - Mat3::Identity()).norm(), 1e-15);
  const Mat3 d = covariance_from(Vec3(std::log(2.0), 0, 0), Vec4(1, 0, 0, 0));
  EXPECT_LT((d - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).norm(), 1e-12);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double s = rng.uniform(0.01, 3.0);
    const Mat3 c = covariance_from(Vec3::Constant(std::log(s)), rng.unit_quat());
    ASSERT_LT((c - s * s * Mat3::Identity()).norm(), 1e-12 * std::max(1.0, s * s));
  }
}

TEST(RigidPose, IdentityBasesAreIdentity) {
  Rng rng(2);
  const MotionBases bases = identity_bases(3, 7);
  for (int i = 0; i < 1000; ++i) {
    RigidGaussian g;
    g.mean = rng.vec3(-5, 5);
    g.quat = rng.unit_quat();
    g.weights = Eigen::VectorXd(3);
    for (int j = 0; j < 3; ++j)
      g.weights[j] = rng.uniform(0.05, 1.0);
    g.weights.normalize();
    const Pose p = rigid_pose_at(g, bases, rng.integer(0, 6));
    // Blended 6D vector is a positive multiple of the identity columns.
    ASSERT_LT((p.mean - g.mean).norm(), 1e-12);
    ASSERT_LT((p.rotation - quat_to_matrix(g.quat)).norm(), 1e-12);
  }
}

TEST(RigidPose, SingleActiveTranslation) {
  MotionBases bases = identity_bases(2, 3);
  bases.at(0, 1).translation = Vec3(1, 0, 0);
  RigidGaussian g = rigid_at(Vec3(0.5, -1, 3), 2);
  g.quat = Vec4(0.9, 0.1, -0.3, 0.2).normalized();
  const Pose p = rigid_pose_at(g, bases, 1);
  EXPECT_LT((p.mean - (g.mean + Vec3(1, 0, 0))).norm(), 1e-12);
  EXPECT_LT((p.rotation - quat_to_matrix(g.quat)).norm(), 1e-12);
}

// The blend sums weighted translations, so duplicated bases agree with a single basis in rotation
// while the translation scales with the weight sum.
TEST(RigidPose, DuplicateBasesBlend) {
  Rng rng(3);
  const SE3Transform tr{rng.rotation(), rng.vec3(-1, 1)};
  MotionBases two = identity_bases(2, 1), one = identity_bases(1, 1);
  two.at(0, 0) = two.at(1, 0) = one.at(0, 0) = tr;
  RigidGaussian g2 = rigid_at(Vec3(0.2, 0.3, 4), 2);
  g2.weights = Eigen::Vector2d(1.0, 1.0) / std::sqrt(2.0);
  RigidGaussian g1 = rigid_at(g2.mean, 1);
  const Pose a = rigid_pose_at(g2, two, 0), b = rigid_pose_at(g1, one, 0);
  EXPECT_LT((a.rotation - b.rotation).norm(), 1e-12);
  EXPECT_LT((b.mean - tr.apply(g1.mean)).norm(), 1e-12);
  EXPECT_LT((a.mean - (tr.rotation * g2.mean + std::sqrt(2.0) * tr.translation)).norm(), 1e-12);
}

TEST(RigidPose, FrameOutOfRangeThrows) {
  EXPECT_THROW(rigid_pose_at(rigid_at(Vec3::Zero(), 1), identity_bases(1, 4), 4), ValidationError);
}

TEST(Transient, Examples) {
  TransientGaussian g;
  g.velocity = Vec3(1, 2, 3);
  g.gamma = 5.0;
  EXPECT_EQ(transient_position_at(g, 7), Vec3(2, 4, 6));
  EXPECT_EQ(transient_position_at(g, 5), Vec3::Zero());
  g.velocity = Vec3::Zero();
  g.mean = Vec3(1, 1, 1);
  EXPECT_EQ(transient_position_at(g, 40), g.mean);
}

TEST(Transient, LinearTrajectoryProperty) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    TransientGaussian g;
    g.mean = rng.vec3(-3, 3);
    g.velocity = Vec3(rng.integer(-8, 8), rng.integer(-8, 8), rng.integer(-8, 8)) / 4.0;
    g.gamma = rng.integer(0, 40);
    const int t1 = rng.integer(0, 40), t2 = rng.integer(0, 40);
    const Vec3 d = transient_position_at(g, t2) - transient_position_at(g, t1);
    ASSERT_LT((d - g.velocity * (t2 - t1)).norm(), 1e-12);
  }
}

TEST(Gating, Examples) {
  EXPECT_DOUBLE_EQ(gated_opacity(1.0, 3.0, 2.0, 10.0, 12.0), 0.5);
  EXPECT_NEAR(gated_opacity(1.0, 3.0, 2.0, 10.0, 10.0), 0.997527376843365, 1e-12);
  EXPECT_LT(gated_opacity(1.0, 3.0, 2.0, 10.0, 30.0), 1e-23);
  EXPECT_GT(gated_opacity(1.0, 3.0, 2.0, 10.0, 30.0), 0.0);
}

TEST(Gating, SymmetryHalfPointAndMonotonicity) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double o = rng.uniform(1e-3, 1.0 - 1e-3), a = rng.uniform(0.1, 10.0), b = rng.uniform(0.01, 30.0);
    const double g = rng.uniform(-50.0, 50.0), d = rng.uniform(0.0, 60.0);
    ASSERT_NEAR(gated_opacity(o, a, b, g, g + d), gated_opacity(o, a, b, g, g - d), 1e-14);
    ASSERT_NEAR(gated_opacity(o, a, b, g, g + b), o / 2.0, 1e-12);
    ASSERT_NEAR(gated_opacity(o, a, b, g, g - b), o / 2.0, 1e-12);
    const double d2 = d + rng.uniform(0.0, 5.0);
    ASSERT_GE(gated_opacity(o, a, b, g, g + d), gated_opacity(o, a, b, g, g + d2));
    ASSERT_NEAR(gated_opacity(o, a, b, g, g + d), o * sigmoid_oracle(a * (b - d)), 1e-12);
  }
}

TEST(Velocity, Examples) {
  TransientGaussian tg;
  tg.velocity = Vec3(1, 0, 0);
  const Velocity tv = gaussian_velocity_at(tg, identity_bases(1, 5), 2);
  EXPECT_EQ(tv.forward, Vec3(1, 0, 0));
  EXPECT_EQ(tv.backward, Vec3(1, 0, 0));

  RigidGaussian g = rigid_at(Vec3(0.3, 0.1, 2), 1);
  const Velocity iv = gaussian_velocity_at(g, identity_bases(1, 5), 2);
  EXPECT_LT(iv.forward.norm() + iv.backward.norm(), 1e-15);

  MotionBases b = identity_bases(1, 6);
  for (int t = 0; t < 6; ++t)
    b.at(0, t).translation = Vec3(0, t, 0);
  for (int t = 0; t < 6; ++t) {
    const Velocity v = gaussian_velocity_at(g, b, t);
    EXPECT_LT((v.forward - Vec3(0, 1, 0)).norm(), 1e-12) << t;
    EXPECT_LT((v.backward - Vec3(0, 1, 0)).norm(), 1e-12) << t;
  }
}

TEST(Transition, NoOpWhenAllDurationsLarge) {
  GaussianSet set;
  set.bases = identity_bases(1, 10);
  for (int i = 0; i < 4; ++i) {
    RigidGaussian g = rigid_at(Vec3(i, 0, 5), 1);
    g.beta = 2.0 + i;
    set.rigids.push_back(g);
  }
  const TransitionResult r = transition_rigid_to_transient(set, 2.0);
  EXPECT_EQ(r.count, 0u);
  EXPECT_EQ(set.rigids.size(), 4u);
  EXPECT_TRUE(set.transients.empty());
}

TEST(Transition, SingleShortRigidUnderIdentityBases) {
  GaussianSet set;
  set.bases = identity_bases(1, 10);
  RigidGaussian g = rigid_at(Vec3(0.1, 0.2, 5), 1);
  g.beta = 1.0;
  g.gamma = 4.4;
  g.color = Vec3(0.1, 0.2, 0.3);
  g.log_scale = Vec3(-1, -2, -3);
  g.opacity_logit = 0.7;
  set.rigids.push_back(g);
  const TransitionResult r = transition_rigid_to_transient(set, 2.0);
  ASSERT_EQ(r.count, 1u);
  ASSERT_EQ(set.transients.size(), 1u);
  const TransientGaussian &t = set.transients[0];
  EXPECT_LT(t.velocity.norm(), 1e-15);
  EXPECT_LT((t.mean - g.mean).norm(), 1e-15);
  EXPECT_EQ(t.beta, g.beta);
  EXPECT_EQ(t.gamma, g.gamma);
  EXPECT_EQ(t.color, g.color);
  EXPECT_EQ(t.log_scale, g.log_scale);
  EXPECT_EQ(t.opacity_logit, g.opacity_logit);
  EXPECT_TRUE(t.from_rigid);
  EXPECT_EQ(transition_rigid_to_transient(set, 2.0).count, 0u);
}

TEST(Transition, VelocityIsCentralDifference) {
  GaussianSet set;
  set.bases = identity_bases(1, 10);
  for (int t = 0; t < 10; ++t)
    set.bases.at(0, t).translation = Vec3(0.5 * t, 0.1 * t * t, 0);
  RigidGaussian g = rigid_at(Vec3::Zero(), 1);
  g.beta = 0.5;
  g.gamma = 4.0;
  set.rigids.push_back(g);
  transition_rigid_to_transient(set, 2.0);
  const TransientGaussian &t = set.transients.at(0);
  EXPECT_LT((t.mean - Vec3(2.0, 1.6, 0)).norm(), 1e-12);
  EXPECT_LT((t.velocity - Vec3(0.5, (2.5 - 0.9) / 2.0, 0)).norm(), 1e-12);
}

TEST(Transition, ConservesPopulationAndPreservesRender) {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    dynsplat::testing::SceneShape shape;
    shape.statics = 1;
    shape.rigids = 6;
    shape.transients = 2;
    shape.bases = 2;
    GaussianSet set = dynsplat::testing::random_set(rng, shape);
    set.bases = identity_bases(2, shape.frames);
    for (auto &g : set.rigids)
      g.beta = rng.uniform(0.2, 4.0);
    const std::size_t before = set.rigids.size() + set.transients.size();
    std::vector<RigidGaussian> old = set.rigids;
    const std::size_t old_transients = set.transients.size();
    const TransitionResult r = transition_rigid_to_transient(set, 2.0);
    ASSERT_EQ(set.rigids.size() + set.transients.size(), before);
    ASSERT_EQ(r.migrated.size(), r.count);
    if (trial % 50 != 0)
      continue;
    // Each migrated Gaussian renders identically at round(gamma) when alone.
    const CameraFrame cam = dynsplat::testing::make_camera(24, 24, 20.0);
    for (std::size_t k = 0; k < r.migrated.size(); ++k) {
      const RigidGaussian &g = old[r.migrated[k]];
      const int tq = static_cast<int>(std::lround(g.gamma));
      GaussianSet a, b;
      a.bases = b.bases = set.bases;
      a.rigids.push_back(g);
      b.transients.push_back(set.transients[old_transients + k]);
      const RenderOutputs ra = render(a, cam, tq), rb = render(b, cam, tq);
      ASSERT_LE(dynsplat::testing::max_abs_diff(ra.channels, rb.channels), 1e-6);
      ASSERT_LE(dynsplat::testing::max_abs_diff(ra.alpha, rb.alpha), 1e-6);
    }
  }
}

TEST(GaussianSet, ValidationCatchesBadFields) {
  GaussianSet set;
  set.bases = identity_bases(2, 3);
  RigidGaussian g = rigid_at(Vec3::Zero(), 3);
  set.rigids.push_back(g);
  EXPECT_THROW(set.validate(), ShapeMismatch);
  set.rigids[0] = rigid_at(Vec3::Zero(), 2);
  set.rigids[0].beta = 0.0;
  EXPECT_THROW(set.validate(), ValidationError);
  set.rigids[0].beta = 1.0;
  set.alpha_gate = 0.0;
  EXPECT_THROW(set.validate(), ValidationError);
}

TEST(Checkpoint, RoundTripAtFloat32) {
  Rng rng(9);
  dynsplat::testing::SceneShape shape;
  shape.frames = 5;
  GaussianSet set = dynsplat::testing::random_set(rng, shape);
  set.rigids[1].origin = 7;
  set.transients[0].origin = 3;
  set.transients[0].from_rigid = true;
  const GaussianSet back = deserialize_checkpoint(serialize_checkpoint(set));
  ASSERT_EQ(back.statics.size(), set.statics.size());
  ASSERT_EQ(back.rigids.size(), set.rigids.size());
  ASSERT_EQ(back.transients.size(), set.transients.size());
  EXPECT_EQ(back.bases.num_bases(), 2);
  EXPECT_EQ(back.bases.num_frames(), 5);
  for (std::size_t i = 0; i < set.rigids.size(); ++i) {
    EXPECT_LT((back.rigids[i].mean - set.rigids[i].mean).norm(), 1e-6);
    EXPECT_LT((back.rigids[i].weights - set.rigids[i].weights).norm(), 1e-6);
    EXPECT_NEAR(back.rigids[i].beta, set.rigids[i].beta, 1e-6);
  }
  EXPECT_EQ(back.rigids[1].origin, 7);
  EXPECT_EQ(back.transients[0].origin, 3);
  EXPECT_TRUE(back.transients[0].from_rigid);
  for (int j = 0; j < 2; ++j)
    for (int t = 0; t < 5; ++t) {
      EXPECT_TRUE(back.bases.at(j, t).is_valid(1e-9));
      EXPECT_LT((back.bases.at(j, t).rotation - set.bases.at(j, t).rotation).norm(), 1e-6);
    }
  // Serialization of the reloaded set is a fixed point.
  EXPECT_EQ(serialize_checkpoint(deserialize_checkpoint(serialize_checkpoint(back))), serialize_checkpoint(back));
}

TEST(Checkpoint, BadMagicAndTruncation) {
  EXPECT_THROW(deserialize_checkpoint("NOTRIGS0"), BadMagic);
  GaussianSet set;
  set.bases = identity_bases(1, 2);
  set.statics.resize(3);
  std::string bytes = serialize_checkpoint(set);
  bytes.resize(bytes.size() - 4);
  EXPECT_THROW(deserialize_checkpoint(bytes), ShapeMismatch);
}
