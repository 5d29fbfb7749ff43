// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/common.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dynsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Pinhole intrinsics in pixels. Pixel (x, y) has its center at integer coordinates.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
};

/// World-to-camera rigid transform.
struct CameraExtrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const;
};

struct CameraFrame {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }
  Vec3 world_to_camera(const Vec3 &p) const { return extrinsics.rotation * p + extrinsics.translation; }
  Vec3 camera_to_world(const Vec3 &p) const { return extrinsics.rotation.transpose() * (p - extrinsics.translation); }
  /// Camera center in world coordinates.
  Vec3 center() const { return -extrinsics.rotation.transpose() * extrinsics.translation; }
};

struct SE3Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static SE3Transform identity() { return {}; }
  Vec3 apply(const Vec3 &p) const { return rotation * p + translation; }
  SE3Transform compose(const SE3Transform &rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  SE3Transform inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -rt * translation};
  }
  bool is_valid(double tol = 1e-9) const;
};

/// First two columns of a rotation prior to Gram-Schmidt orthonormalization.
struct Rotation6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();

  Vec6 as_vector() const;
  static Rotation6D from_vector(const Vec6 &v);
  static Rotation6D from_matrix(const Mat3 &r);
};

struct Projection {
  Vec2 pixel;
  double depth;
};

constexpr double kMinCameraDepth = 1e-8;
constexpr double kCovarianceDilation = 0.3;

Projection project(const Vec3 &world_point, const CameraFrame &cam);
Vec3 unproject(const Vec2 &pixel, double depth, const CameraFrame &cam);

struct WarpResult {
  ImageD values;
  Mask valid;
};

/// Samples `field` at p + flow(p) with bilinear interpolation. Samples whose footprint leaves
/// the pixel-center grid [0, W-1] x [0, H-1] are zeroed and flagged invalid.
WarpResult warp(const ImageD &field, const ImageD &flow);

/// Bilinear sample of all channels at a continuous location. Returns false when out of bounds.
bool sample_bilinear(const ImageD &field, double x, double y, double *out);

Mat3 rot6d_to_matrix(const Rotation6D &r);
/// Adjoint of rot6d_to_matrix: given dL/dR, returns dL/d(a1, a2) stacked.
Vec6 rot6d_backward(const Rotation6D &r, const Mat3 &grad_rotation);

SE3Transform interpolate_se3(const SE3Transform &ta, const SE3Transform &tb, double s);

/// Pinhole Jacobian of the pixel coordinates w.r.t. the camera-space point.
Mat23 projection_jacobian(const Vec3 &mean_cam, const CameraIntrinsics &k);

/// EWA projection of a world-space covariance to a screen-space covariance (with the 0.3 px^2 floor).
Mat2 ewa_project_covariance(const Mat3 &cov_world, const CameraFrame &cam, const Vec3 &mean_cam);

/// Unit quaternion (w, x, y, z) to rotation. The input is normalized first.
Mat3 quat_to_matrix(const Vec4 &q);
/// Adjoint of quat_to_matrix including the normalization.
Vec4 quat_to_matrix_backward(const Vec4 &q, const Mat3 &grad_rotation);
Vec4 matrix_to_quat(const Mat3 &r);

Mat3 skew(const Vec3 &v);
Mat3 rotation_from_axis_angle(const Vec3 &axis_angle);

} // namespace dynsplat
