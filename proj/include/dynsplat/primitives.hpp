// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dynsplat {

/// Time-invariant Gaussian. Scale and opacity are stored in log / logit space.
struct StaticGaussian {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 quat = Vec4(1, 0, 0, 0); ///< (w, x, y, z)
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Zero();
};

/// Gaussian driven by the shared motion bases. `mean`/`quat` describe the canonical pose.
struct RigidGaussian : StaticGaussian {
  Eigen::VectorXd weights;
  double beta = 1.0;  ///< temporal duration, frames
  double gamma = 0.0; ///< temporal center, frames
  std::int32_t origin = 0; ///< object id the Gaussian was seeded from (bookkeeping only)
};

/// Short-lived Gaussian moving linearly: mean(t) = mean + velocity * (t - gamma).
struct TransientGaussian : StaticGaussian {
  Vec3 velocity = Vec3::Zero();
  double beta = 1.0;
  double gamma = 0.0;
  std::int32_t origin = 0;
  /// Set when the Gaussian was created by the rigid-to-transient transition.
  bool from_rigid = false;
};

/// K x T table of per-frame SE(3) transforms.
class MotionBases {
public:
  MotionBases() = default;
  MotionBases(int num_bases, int num_frames)
      : num_bases_(num_bases), num_frames_(num_frames),
        transforms_(static_cast<std::size_t>(num_bases) * num_frames) {}

  int num_bases() const { return num_bases_; }
  int num_frames() const { return num_frames_; }
  SE3Transform &at(int j, int t) { return transforms_[static_cast<std::size_t>(j) * num_frames_ + t]; }
  const SE3Transform &at(int j, int t) const { return transforms_[static_cast<std::size_t>(j) * num_frames_ + t]; }
  std::size_t size() const { return transforms_.size(); }

private:
  int num_bases_ = 0;
  int num_frames_ = 0;
  std::vector<SE3Transform> transforms_;
};

struct GaussianSet {
  std::vector<StaticGaussian> statics;
  std::vector<RigidGaussian> rigids;
  std::vector<TransientGaussian> transients;
  MotionBases bases;
  double alpha_gate = 3.0;

  int num_frames() const { return bases.num_frames(); }
  std::size_t dynamic_count() const { return rigids.size() + transients.size(); }
  void validate() const;
};

struct Pose {
  Vec3 mean;
  Mat3 rotation;
};

double sigmoid(double x);
double logit(double p);

Mat3 covariance_from(const Vec3 &log_scale, const Vec4 &quat);

/// Blend of the bases at frame t: translation = sum w_j t_j, rotation from the blended 6D vector.
SE3Transform blend_bases(const Eigen::VectorXd &weights, const MotionBases &bases, int t);
/// Blended transform at a fractional time, interpolating between integer knots.
SE3Transform blend_bases_at(const Eigen::VectorXd &weights, const MotionBases &bases, double t);

Pose rigid_pose_at(const RigidGaussian &g, const MotionBases &bases, int t);
Vec3 transient_position_at(const TransientGaussian &g, double t);

double gated_opacity(double opacity, double alpha, double beta, double gamma, double t);

struct Velocity {
  Vec3 forward;
  Vec3 backward;
};

Velocity gaussian_velocity_at(const RigidGaussian &g, const MotionBases &bases, int t);
Velocity gaussian_velocity_at(const TransientGaussian &g, const MotionBases &bases, int t);

/// Neighbouring frames used for the finite-difference velocity at t (one-sided at sequence ends).
struct VelocityFrames {
  int fwd_a, fwd_b; ///< v_fwd = mean(fwd_b) - mean(fwd_a)
  int bwd_a, bwd_b; ///< v_bwd = mean(bwd_b) - mean(bwd_a)
};
VelocityFrames velocity_frames(int t, int num_frames);

struct TransitionResult {
  std::size_t count = 0;
  /// Indices (into the pre-transition rigid list) that were migrated, ascending.
  std::vector<std::size_t> migrated;
};

/// Converts every rigid Gaussian with beta < threshold into a transient Gaussian.
/// Converted Gaussians are appended to `transients` in ascending rigid index order.
TransitionResult transition_rigid_to_transient(GaussianSet &set, double threshold);

/// Builds the transient equivalent of a rigid Gaussian (pose and velocity at round(gamma)).
TransientGaussian to_transient(const RigidGaussian &g, const MotionBases &bases);

MotionBases identity_bases(int num_bases, int num_frames);

} // namespace dynsplat
