// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/geometry.hpp"

#include <cmath>

namespace dynsplat {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw ValidationError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw ValidationError("camera image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw ValidationError("principal point outside the image");
}

namespace {
bool is_rotation(const Mat3 &r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}
} // namespace

void CameraExtrinsics::validate() const {
  if (!is_rotation(rotation, 1e-9))
    throw ValidationError("camera rotation is not orthonormal with det 1");
  if (!translation.allFinite())
    throw ValidationError("camera translation is not finite");
}

bool SE3Transform::is_valid(double tol) const { return is_rotation(rotation, tol) && translation.allFinite(); }

Vec6 Rotation6D::as_vector() const {
  Vec6 v;
  v << a1, a2;
  return v;
}

Rotation6D Rotation6D::from_vector(const Vec6 &v) { return {v.head<3>(), v.tail<3>()}; }

Rotation6D Rotation6D::from_matrix(const Mat3 &r) { return {r.col(0), r.col(1)}; }

Projection project(const Vec3 &world_point, const CameraFrame &cam) {
  const Vec3 pc = cam.world_to_camera(world_point);
  if (!(pc.z() > kMinCameraDepth))
    throw NonPositiveDepth();
  const auto &k = cam.intrinsics;
  return {Vec2(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy), pc.z()};
}

Vec3 unproject(const Vec2 &pixel, double depth, const CameraFrame &cam) {
  if (!(depth > 0.0))
    throw NonPositiveDepth();
  const auto &k = cam.intrinsics;
  const Vec3 pc((pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth);
  return cam.camera_to_world(pc);
}

bool sample_bilinear(const ImageD &field, double x, double y, double *out) {
  const int w = field.width;
  const int h = field.height;
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1))
    return false;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  // Samples on the last row/column use the preceding cell with weight 1 on the far corner.
  if (x0 == w - 1 && w > 1)
    --x0;
  if (y0 == h - 1 && h > 1)
    --y0;
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
  for (int c = 0; c < field.channels; ++c) {
    out[c] = w00 * field.at(x0, y0, c) + w10 * field.at(x1, y0, c) + w01 * field.at(x0, y1, c) +
             w11 * field.at(x1, y1, c);
  }
  return true;
}

WarpResult warp(const ImageD &field, const ImageD &flow) {
  if (!field.same_shape(flow) || flow.channels != 2)
    throw ShapeMismatch("warp: field and flow must share H x W and flow must have 2 channels");
  WarpResult r{ImageD(field.width, field.height, field.channels), Mask(field.width, field.height, 1)};
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const double sx = x + flow.at(x, y, 0);
      const double sy = y + flow.at(x, y, 1);
      if (sample_bilinear(field, sx, sy, &r.values.at(x, y, 0)))
        r.valid.at(x, y) = 1;
    }
  }
  return r;
}

namespace {
constexpr double kRot6dEps = 1e-12;
}

Mat3 rot6d_to_matrix(const Rotation6D &r) {
  const double n1 = r.a1.norm();
  if (!(n1 > kRot6dEps))
    throw DegenerateRotation6D();
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  if (!(n2 > kRot6dEps))
    throw DegenerateRotation6D();
  const Vec3 b2 = u2 / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

Vec6 rot6d_backward(const Rotation6D &r, const Mat3 &grad_rotation) {
  const double n1 = r.a1.norm();
  if (!(n1 > kRot6dEps))
    throw DegenerateRotation6D();
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  if (!(n2 > kRot6dEps))
    throw DegenerateRotation6D();
  const Vec3 b2 = u2 / n2;

  const Vec3 g3 = grad_rotation.col(2);
  Vec3 gb1 = grad_rotation.col(0) + b2.cross(g3);
  const Vec3 gb2 = grad_rotation.col(1) + g3.cross(b1);

  const Vec3 gu2 = (gb2 - b2 * b2.dot(gb2)) / n2;
  const Vec3 ga2 = gu2 - b1 * b1.dot(gu2);
  gb1 += -b1.dot(r.a2) * gu2 - b1.dot(gu2) * r.a2;
  const Vec3 ga1 = (gb1 - b1 * b1.dot(gb1)) / n1;

  Vec6 out;
  out << ga1, ga2;
  return out;
}

SE3Transform interpolate_se3(const SE3Transform &ta, const SE3Transform &tb, double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw ValidationError("interpolate_se3: s must lie in [0, 1]");
  if (s == 0.0)
    return ta;
  if (s == 1.0)
    return tb;
  const Vec6 blended = (1.0 - s) * Rotation6D::from_matrix(ta.rotation).as_vector() +
                       s * Rotation6D::from_matrix(tb.rotation).as_vector();
  return {rot6d_to_matrix(Rotation6D::from_vector(blended)), (1.0 - s) * ta.translation + s * tb.translation};
}

Mat23 projection_jacobian(const Vec3 &mean_cam, const CameraIntrinsics &k) {
  const double z = mean_cam.z();
  const double iz = 1.0 / z;
  const double iz2 = iz * iz;
  Mat23 j;
  j << k.fx * iz, 0.0, -k.fx * mean_cam.x() * iz2, 0.0, k.fy * iz, -k.fy * mean_cam.y() * iz2;
  return j;
}

Mat2 ewa_project_covariance(const Mat3 &cov_world, const CameraFrame &cam, const Vec3 &mean_cam) {
  if (!(mean_cam.z() > kMinCameraDepth))
    throw NonPositiveDepth();
  const Mat23 m = projection_jacobian(mean_cam, cam.intrinsics) * cam.extrinsics.rotation;
  Mat2 cov = m * cov_world * m.transpose();
  const double off = 0.5 * (cov(0, 1) + cov(1, 0));
  cov(0, 1) = cov(1, 0) = off;
  cov(0, 0) += kCovarianceDilation;
  cov(1, 1) += kCovarianceDilation;
  return cov;
}

Mat3 quat_to_matrix(const Vec4 &q_raw) {
  const Vec4 q = q_raw.normalized();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 quat_to_matrix_backward(const Vec4 &q_raw, const Mat3 &g) {
  const double n = q_raw.norm();
  const Vec4 q = q_raw / n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 gq;
  gq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  gq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) + w * g(2, 1) -
               2 * x * g(2, 2));
  gq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) + z * g(2, 1) -
               2 * y * g(2, 2));
  gq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
               x * g(2, 0) + y * g(2, 1));
  // Through q / |q|.
  return (gq - q * q.dot(gq)) / n;
}

Vec4 matrix_to_quat(const Mat3 &r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0)
    out = -out;
  return out;
}

Mat3 skew(const Vec3 &v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 rotation_from_axis_angle(const Vec3 &axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-15)
    return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

} // namespace dynsplat
