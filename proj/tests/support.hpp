// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

// Seeded generators and small helpers shared by the unit and acceptance tests.

#pragma once

#include "dynsplat/primitives.hpp"
#include "dynsplat/rasterizer.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <random>
#include <string>

namespace dynsplat::testing {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(gen_); }
  Vec3 vec3(double lo, double hi) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }
  Vec3 gaussian3(double sigma = 1.0) { return Vec3(normal(sigma), normal(sigma), normal(sigma)); }
  Vec4 unit_quat() {
    Vec4 q(normal(), normal(), normal(), normal());
    return q / q.norm();
  }
  Mat3 rotation() {
    const Vec4 q = unit_quat();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  }
  Mat3 small_rotation(double max_angle) {
    Vec3 axis = gaussian3();
    axis.normalize();
    return Eigen::AngleAxisd(uniform(-max_angle, max_angle), axis).toRotationMatrix();
  }
  std::mt19937_64 &engine() { return gen_; }

private:
  std::mt19937_64 gen_;
};

inline CameraFrame make_camera(int width, int height, double f, const Mat3 &rotation = Mat3::Identity(),
                               const Vec3 &translation = Vec3::Zero()) {
  CameraFrame cam;
  cam.intrinsics = {f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  cam.extrinsics.rotation = rotation;
  cam.extrinsics.translation = translation;
  return cam;
}

inline void fill_core(Rng &rng, StaticGaussian &g, double depth_lo, double depth_hi, double spread,
                      double scale_lo, double scale_hi, double opacity_lo, double opacity_hi) {
  g.mean = Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(depth_lo, depth_hi));
  g.log_scale = Vec3(std::log(rng.uniform(scale_lo, scale_hi)), std::log(rng.uniform(scale_lo, scale_hi)),
                     std::log(rng.uniform(scale_lo, scale_hi)));
  g.quat = rng.unit_quat();
  g.opacity_logit = logit(rng.uniform(opacity_lo, opacity_hi));
  g.color = rng.vec3(0.0, 1.0);
}

struct SceneShape {
  int statics = 3;
  int rigids = 3;
  int transients = 3;
  int bases = 2;
  int frames = 6;
  double depth_lo = 3.0;
  double depth_hi = 6.0;
  double spread = 1.2;
  double scale_lo = 0.08;
  double scale_hi = 0.4;
  double opacity_lo = 0.2;
  double opacity_hi = 0.8;
};

/// Random mixed set in front of an identity camera; bases are small random motions.
inline GaussianSet random_set(Rng &rng, const SceneShape &shape) {
  GaussianSet set;
  set.alpha_gate = 3.0;
  set.bases = MotionBases(shape.bases, shape.frames);
  for (int j = 0; j < shape.bases; ++j)
    for (int t = 0; t < shape.frames; ++t)
      set.bases.at(j, t) = {rng.small_rotation(0.2), rng.vec3(-0.2, 0.2)};
  auto core = [&](StaticGaussian &g) {
    fill_core(rng, g, shape.depth_lo, shape.depth_hi, shape.spread, shape.scale_lo, shape.scale_hi,
              shape.opacity_lo, shape.opacity_hi);
  };
  for (int i = 0; i < shape.statics; ++i) {
    StaticGaussian g;
    core(g);
    set.statics.push_back(g);
  }
  for (int i = 0; i < shape.rigids; ++i) {
    RigidGaussian g;
    core(g);
    g.weights = Eigen::VectorXd(shape.bases);
    for (int j = 0; j < shape.bases; ++j)
      g.weights[j] = rng.uniform(0.2, 1.0);
    g.weights.normalize();
    g.beta = rng.uniform(1.0, 3.0);
    g.gamma = rng.uniform(0.0, shape.frames - 1.0);
    set.rigids.push_back(g);
  }
  for (int i = 0; i < shape.transients; ++i) {
    TransientGaussian g;
    core(g);
    g.velocity = rng.vec3(-0.1, 0.1);
    g.beta = rng.uniform(1.0, 3.0);
    g.gamma = rng.uniform(0.0, shape.frames - 1.0);
    set.transients.push_back(g);
  }
  return set;
}

/// Random screen-space splats for rasterizer-only tests.
inline std::vector<Splat> random_splats(Rng &rng, int count, int width, int height, double opacity_hi = 0.9) {
  std::vector<Splat> out;
  for (int i = 0; i < count; ++i) {
    Splat s;
    s.mean2d = Vec2(rng.uniform(-4.0, width + 3.0), rng.uniform(-4.0, height + 3.0));
    const double a = rng.uniform(0.5, 5.0), b = rng.uniform(0.5, 5.0), th = rng.uniform(0.0, M_PI);
    Mat2 r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    s.cov2d = r * Vec2(a * a, b * b).asDiagonal() * r.transpose() + 0.3 * Mat2::Identity();
    s.depth = rng.uniform(1.0, 10.0);
    s.opacity = rng.uniform(0.05, opacity_hi);
    for (double &p : s.payload)
      p = rng.uniform(-1.0, 1.0);
    s.index = static_cast<std::uint32_t>(i);
    out.push_back(s);
  }
  return out;
}

inline double max_abs_diff(const ImageD &a, const ImageD &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// Linear functional of the render: sum of outputs weighted by the adjoint images.
inline double weighted_render(const GaussianSet &set, const CameraFrame &cam, int t, int t_corr,
                              const RasterSettings &rs, const RenderGrads &adj) {
  const std::vector<Splat> sp = prepare_splats(set, cam, t, t_corr, rs);
  const RenderOutputs o = rasterize_forward(sp, cam, rs);
  double l = 0.0;
  for (std::size_t i = 0; i < o.channels.data.size(); ++i)
    l += o.channels.data[i] * adj.channels.data[i];
  for (std::size_t i = 0; i < o.alpha.data.size(); ++i)
    l += o.alpha.data[i] * adj.alpha.data[i];
  return l;
}

struct GradCheck {
  double worst = 0.0; ///< worst relative error over all parameters
  std::string worst_name;
  int checked = 0;
};

/// Central finite differences of weighted_render against rasterize_backward for every parameter.
/// Basis rotations are perturbed through their first two columns, which is all the blend reads.
inline GradCheck check_render_gradients(GaussianSet set, const CameraFrame &cam, int t, int t_corr,
                                        const RasterSettings &rs, const RenderGrads &adj, double h = 1e-4,
                                        double abs_floor = 1e-6) {
  const std::vector<Splat> sp = prepare_splats(set, cam, t, t_corr, rs);
  const RenderOutputs out = rasterize_forward(sp, cam, rs);
  const GradientBuffers g = rasterize_backward(sp, cam, out, adj, set, t, t_corr, rs);
  GradCheck r;
  auto check = [&](const std::string &name, double &p, double analytic) {
    const double keep = p;
    p = keep + h;
    const double lp = weighted_render(set, cam, t, t_corr, rs, adj);
    p = keep - h;
    const double lm = weighted_render(set, cam, t, t_corr, rs, adj);
    p = keep;
    const double fd = (lp - lm) / (2.0 * h);
    const double diff = std::abs(fd - analytic);
    const double rel = diff <= abs_floor ? 0.0 : diff / std::max(std::abs(fd), std::abs(analytic));
    ++r.checked;
    if (rel > r.worst) {
      r.worst = rel;
      r.worst_name = name;
    }
  };
  auto core = [&](const std::string &pfx, StaticGaussian &p, const StaticGaussian &a) {
    for (int d = 0; d < 3; ++d) {
      check(pfx + ".mean", p.mean[d], a.mean[d]);
      check(pfx + ".log_scale", p.log_scale[d], a.log_scale[d]);
      check(pfx + ".color", p.color[d], a.color[d]);
    }
    for (int d = 0; d < 4; ++d)
      check(pfx + ".quat", p.quat[d], a.quat[d]);
    check(pfx + ".opacity", p.opacity_logit, a.opacity_logit);
  };
  for (std::size_t i = 0; i < set.statics.size(); ++i)
    core("static", set.statics[i], g.statics[i]);
  for (std::size_t i = 0; i < set.rigids.size(); ++i) {
    RigidGaussian &p = set.rigids[i];
    core("rigid", p, g.rigids[i]);
    for (int j = 0; j < p.weights.size(); ++j)
      check("rigid.w", p.weights[j], g.rigids[i].weights[j]);
    check("rigid.beta", p.beta, g.rigids[i].beta);
    check("rigid.gamma", p.gamma, g.rigids[i].gamma);
  }
  for (std::size_t i = 0; i < set.transients.size(); ++i) {
    TransientGaussian &p = set.transients[i];
    core("transient", p, g.transients[i]);
    for (int d = 0; d < 3; ++d)
      check("transient.velocity", p.velocity[d], g.transients[i].velocity[d]);
    check("transient.beta", p.beta, g.transients[i].beta);
    check("transient.gamma", p.gamma, g.transients[i].gamma);
  }
  const int nf = set.bases.num_frames();
  for (int j = 0; j < set.bases.num_bases(); ++j)
    for (int f = 0; f < nf; ++f) {
      SE3Transform &b = set.bases.at(j, f);
      const std::size_t bi = static_cast<std::size_t>(j) * nf + f;
      for (int d = 0; d < 3; ++d) {
        check("basis.rotation", b.rotation(d, 0), g.basis_rotation[bi][d]);
        check("basis.rotation", b.rotation(d, 1), g.basis_rotation[bi][3 + d]);
        check("basis.translation", b.translation[d], g.basis_translation[bi][d]);
      }
    }
  return r;
}

inline RenderGrads random_adjoint(Rng &rng, int width, int height) {
  RenderGrads g(width, height);
  for (double &v : g.channels.data)
    v = rng.uniform(-0.5, 0.5);
  for (double &v : g.alpha.data)
    v = rng.uniform(-0.5, 0.5);
  return g;
}

} // namespace dynsplat::testing
