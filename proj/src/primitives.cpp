// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/primitives.hpp"

#include <algorithm>
#include <cmath>

namespace dynsplat {

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

void GaussianSet::validate() const {
  if (!(alpha_gate > 0.0))
    throw ValidationError("alpha_gate must be positive");
  const int k = bases.num_bases();
  for (const auto &g : rigids) {
    if (g.weights.size() != k)
      throw ShapeMismatch("rigid weight vector does not match the number of motion bases");
    if (!(g.beta > 0.0))
      throw ValidationError("rigid beta must be positive");
  }
  for (const auto &g : transients)
    if (!(g.beta > 0.0))
      throw ValidationError("transient beta must be positive");
}

Mat3 covariance_from(const Vec3 &log_scale, const Vec4 &quat) {
  const Mat3 r = quat_to_matrix(quat);
  const Vec3 s2 = (2.0 * log_scale).array().exp();
  return r * s2.asDiagonal() * r.transpose();
}

SE3Transform blend_bases(const Eigen::VectorXd &weights, const MotionBases &bases, int t) {
  Vec6 r6 = Vec6::Zero();
  Vec3 tr = Vec3::Zero();
  for (int j = 0; j < bases.num_bases(); ++j) {
    const double w = weights[j];
    if (w == 0.0)
      continue;
    const SE3Transform &b = bases.at(j, t);
    r6.head<3>() += w * b.rotation.col(0);
    r6.tail<3>() += w * b.rotation.col(1);
    tr += w * b.translation;
  }
  return {rot6d_to_matrix(Rotation6D::from_vector(r6)), tr};
}

SE3Transform blend_bases_at(const Eigen::VectorXd &weights, const MotionBases &bases, double t) {
  const int last = bases.num_frames() - 1;
  const double tc = std::clamp(t, 0.0, static_cast<double>(last));
  const int t0 = static_cast<int>(std::floor(tc));
  if (t0 >= last || tc == t0)
    return blend_bases(weights, bases, std::min(t0, last));
  return interpolate_se3(blend_bases(weights, bases, t0), blend_bases(weights, bases, t0 + 1), tc - t0);
}

Pose rigid_pose_at(const RigidGaussian &g, const MotionBases &bases, int t) {
  if (t < 0 || t >= bases.num_frames())
    throw ValidationError("rigid_pose_at: frame index out of range");
  const SE3Transform a = blend_bases(g.weights, bases, t);
  return {a.apply(g.mean), a.rotation * quat_to_matrix(g.quat)};
}

Vec3 transient_position_at(const TransientGaussian &g, double t) { return g.mean + g.velocity * (t - g.gamma); }

double gated_opacity(double opacity, double alpha, double beta, double gamma, double t) {
  return opacity * sigmoid(alpha * (beta - std::abs(t - gamma)));
}

VelocityFrames velocity_frames(int t, int num_frames) {
  if (num_frames <= 1)
    return {t, t, t, t};
  VelocityFrames f{t, t + 1, t - 1, t};
  if (t + 1 >= num_frames)
    f.fwd_a = t - 1, f.fwd_b = t;
  if (t - 1 < 0)
    f.bwd_a = t, f.bwd_b = t + 1;
  return f;
}

Velocity gaussian_velocity_at(const RigidGaussian &g, const MotionBases &bases, int t) {
  const VelocityFrames f = velocity_frames(t, bases.num_frames());
  auto pos = [&](int k) { return blend_bases(g.weights, bases, k).apply(g.mean); };
  return {pos(f.fwd_b) - pos(f.fwd_a), pos(f.bwd_b) - pos(f.bwd_a)};
}

Velocity gaussian_velocity_at(const TransientGaussian &g, const MotionBases &, int) { return {g.velocity, g.velocity}; }

TransientGaussian to_transient(const RigidGaussian &g, const MotionBases &bases) {
  const int nf = bases.num_frames();
  const int t0 = std::clamp(static_cast<int>(std::lround(g.gamma)), 0, nf - 1);
  const Pose pose = rigid_pose_at(g, bases, t0);

  Vec3 velocity = Vec3::Zero();
  if (nf > 1) {
    const int lo = std::max(t0 - 1, 0);
    const int hi = std::min(t0 + 1, nf - 1);
    velocity = (rigid_pose_at(g, bases, hi).mean - rigid_pose_at(g, bases, lo).mean) / static_cast<double>(hi - lo);
  }

  TransientGaussian out;
  static_cast<StaticGaussian &>(out) = static_cast<const StaticGaussian &>(g);
  out.velocity = velocity;
  // Anchor the linear trajectory so that it passes through the rigid pose at t0.
  out.mean = pose.mean - velocity * (t0 - g.gamma);
  out.quat = matrix_to_quat(pose.rotation);
  out.beta = g.beta;
  out.gamma = g.gamma;
  out.origin = g.origin;
  out.from_rigid = true;
  return out;
}

TransitionResult transition_rigid_to_transient(GaussianSet &set, double threshold) {
  if (!(threshold > 0.0))
    throw ValidationError("transition threshold must be positive");
  TransitionResult result;
  std::vector<RigidGaussian> kept;
  kept.reserve(set.rigids.size());
  for (std::size_t i = 0; i < set.rigids.size(); ++i) {
    const RigidGaussian &g = set.rigids[i];
    if (g.beta < threshold) {
      set.transients.push_back(to_transient(g, set.bases));
      result.migrated.push_back(i);
    } else {
      kept.push_back(g);
    }
  }
  result.count = result.migrated.size();
  set.rigids = std::move(kept);
  return result;
}

MotionBases identity_bases(int num_bases, int num_frames) { return MotionBases(num_bases, num_frames); }

} // namespace dynsplat
