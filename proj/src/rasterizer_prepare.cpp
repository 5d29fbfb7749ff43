// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "raster_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynsplat {

RenderOutputs::RenderOutputs(int w, int h)
    : width(w), height(h), channels(w, h, channel::kCount), alpha(w, h, 1), transmittance(w, h, 1, 1.0) {}

ImageD RenderOutputs::extract(int first, int count) const {
  ImageD out(width, height, count);
  for (std::size_t p = 0; p < out.pixel_count(); ++p)
    for (int c = 0; c < count; ++c)
      out.data[p * count + c] = channels.data[p * channel::kCount + first + c];
  return out;
}

GradientBuffers GradientBuffers::zeros_like(const GaussianSet &set) {
  GradientBuffers g;
  auto zero_core = [](StaticGaussian &s) {
    s.mean.setZero();
    s.log_scale.setZero();
    s.quat.setZero();
    s.opacity_logit = 0.0;
    s.color.setZero();
  };
  g.statics.resize(set.statics.size());
  for (auto &s : g.statics)
    zero_core(s);
  g.rigids.resize(set.rigids.size());
  for (auto &r : g.rigids) {
    zero_core(r);
    r.weights = Eigen::VectorXd::Zero(set.bases.num_bases());
    r.beta = r.gamma = 0.0;
  }
  g.transients.resize(set.transients.size());
  for (auto &r : g.transients) {
    zero_core(r);
    r.velocity.setZero();
    r.beta = r.gamma = 0.0;
  }
  g.basis_rotation.assign(set.bases.size(), Vec6::Zero());
  g.basis_translation.assign(set.bases.size(), Vec3::Zero());
  return g;
}

namespace {
void add_core(StaticGaussian &a, const StaticGaussian &b) {
  a.mean += b.mean;
  a.log_scale += b.log_scale;
  a.quat += b.quat;
  a.opacity_logit += b.opacity_logit;
  a.color += b.color;
}
bool core_finite(const StaticGaussian &a) {
  return a.mean.allFinite() && a.log_scale.allFinite() && a.quat.allFinite() && std::isfinite(a.opacity_logit) &&
         a.color.allFinite();
}
} // namespace

GradientBuffers &GradientBuffers::operator+=(const GradientBuffers &o) {
  if (o.statics.size() != statics.size() || o.rigids.size() != rigids.size() ||
      o.transients.size() != transients.size() || o.basis_rotation.size() != basis_rotation.size())
    throw ShapeMismatch("gradient buffers of different shapes");
  for (std::size_t i = 0; i < statics.size(); ++i)
    add_core(statics[i], o.statics[i]);
  for (std::size_t i = 0; i < rigids.size(); ++i) {
    add_core(rigids[i], o.rigids[i]);
    rigids[i].weights += o.rigids[i].weights;
    rigids[i].beta += o.rigids[i].beta;
    rigids[i].gamma += o.rigids[i].gamma;
  }
  for (std::size_t i = 0; i < transients.size(); ++i) {
    add_core(transients[i], o.transients[i]);
    transients[i].velocity += o.transients[i].velocity;
    transients[i].beta += o.transients[i].beta;
    transients[i].gamma += o.transients[i].gamma;
  }
  for (std::size_t i = 0; i < basis_rotation.size(); ++i) {
    basis_rotation[i] += o.basis_rotation[i];
    basis_translation[i] += o.basis_translation[i];
  }
  return *this;
}

bool GradientBuffers::all_finite() const {
  for (const auto &g : statics)
    if (!core_finite(g))
      return false;
  for (const auto &g : rigids)
    if (!core_finite(g) || !g.weights.allFinite() || !std::isfinite(g.beta) || !std::isfinite(g.gamma))
      return false;
  for (const auto &g : transients)
    if (!core_finite(g) || !g.velocity.allFinite() || !std::isfinite(g.beta) || !std::isfinite(g.gamma))
      return false;
  for (std::size_t i = 0; i < basis_rotation.size(); ++i)
    if (!basis_rotation[i].allFinite() || !basis_translation[i].allFinite())
      return false;
  return true;
}

namespace detail {

namespace {

void set3(std::array<double, channel::kCount> &p, int at, const Vec3 &v) {
  p[at] = v.x();
  p[at + 1] = v.y();
  p[at + 2] = v.z();
}

} // namespace

std::optional<GaussianEval> evaluate_gaussian(const GaussianSet &set, Population pop, std::size_t index,
                                              const CameraFrame &cam, int t, std::optional<int> t_corr) {
  GaussianEval e;
  const StaticGaussian *core = nullptr;
  Vec3 vel_fwd = Vec3::Zero(), vel_bwd = Vec3::Zero(), corr = Vec3::Zero();
  double dyn = 0.0;

  switch (pop) {
  case Population::Static: {
    const auto &g = set.statics[index];
    core = &g;
    e.mean_world = g.mean;
    e.rot_canonical = quat_to_matrix(g.quat);
    e.rot_world = e.rot_canonical;
    e.base_opacity = sigmoid(g.opacity_logit);
    e.gate = 1.0;
    corr = g.mean;
    break;
  }
  case Population::Rigid: {
    const auto &g = set.rigids[index];
    core = &g;
    const SE3Transform a = blend_bases(g.weights, set.bases, t);
    e.mean_world = a.apply(g.mean);
    e.rot_canonical = quat_to_matrix(g.quat);
    e.rot_world = a.rotation * e.rot_canonical;
    e.base_opacity = sigmoid(g.opacity_logit);
    e.gate = sigmoid(set.alpha_gate * (g.beta - std::abs(t - g.gamma)));
    const Velocity v = gaussian_velocity_at(g, set.bases, t);
    vel_fwd = v.forward;
    vel_bwd = v.backward;
    corr = t_corr ? blend_bases(g.weights, set.bases, *t_corr).apply(g.mean) : e.mean_world;
    dyn = 1.0;
    break;
  }
  case Population::Transient: {
    const auto &g = set.transients[index];
    core = &g;
    e.mean_world = transient_position_at(g, t);
    e.rot_canonical = quat_to_matrix(g.quat);
    e.rot_world = e.rot_canonical;
    e.base_opacity = sigmoid(g.opacity_logit);
    e.gate = sigmoid(set.alpha_gate * (g.beta - std::abs(t - g.gamma)));
    vel_fwd = vel_bwd = g.velocity;
    corr = t_corr ? transient_position_at(g, *t_corr) : e.mean_world;
    dyn = 1.0;
    break;
  }
  }
  e.opacity = e.base_opacity * e.gate;

  e.mean_cam = cam.world_to_camera(e.mean_world);
  if (!(e.mean_cam.z() > kMinCameraDepth))
    return std::nullopt;

  e.scales = core->log_scale.array().exp();
  e.cov_world = e.rot_world * e.scales.cwiseAbs2().asDiagonal() * e.rot_world.transpose();
  e.jac = projection_jacobian(e.mean_cam, cam.intrinsics);
  e.m = e.jac * cam.extrinsics.rotation;
  e.cov2d = e.m * e.cov_world * e.m.transpose();
  const double off = 0.5 * (e.cov2d(0, 1) + e.cov2d(1, 0));
  e.cov2d(0, 1) = e.cov2d(1, 0) = off;
  e.cov2d(0, 0) += kCovarianceDilation;
  e.cov2d(1, 1) += kCovarianceDilation;
  const auto &k = cam.intrinsics;
  e.mean2d = Vec2(k.fx * e.mean_cam.x() / e.mean_cam.z() + k.cx, k.fy * e.mean_cam.y() / e.mean_cam.z() + k.cy);

  e.scales.minCoeff(&e.normal_axis);
  const Vec3 axis = e.rot_world.col(e.normal_axis);
  e.normal_sign = axis.dot(cam.center() - e.mean_world) < 0.0 ? -1.0 : 1.0;

  set3(e.payload, channel::kColor, core->color);
  e.payload[channel::kDepth] = e.mean_cam.z();
  e.payload[channel::kDynMask] = dyn;
  set3(e.payload, channel::kNormal, e.normal_sign * axis);
  set3(e.payload, channel::kVelFwd, vel_fwd);
  set3(e.payload, channel::kVelBwd, vel_bwd);
  set3(e.payload, channel::kCorr, corr);
  return e;
}

std::vector<std::uint32_t> depth_order(std::span<const Splat> splats) {
  std::vector<std::uint32_t> order(splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (splats[a].depth != splats[b].depth)
      return splats[a].depth < splats[b].depth;
    return a < b;
  });
  return order;
}

RasterPlan build_plan(std::span<const Splat> splats, int width, int height, const RasterSettings &settings) {
  RasterPlan plan;
  plan.tile_size = settings.tile_size;
  plan.tiles_x = (width + settings.tile_size - 1) / settings.tile_size;
  plan.tiles_y = (height + settings.tile_size - 1) / settings.tile_size;
  plan.tiles.resize(static_cast<std::size_t>(plan.tiles_x) * plan.tiles_y);
  plan.order = depth_order(splats);
  for (std::uint32_t idx : plan.order) {
    const Splat &s = splats[idx];
    if (!(s.opacity >= settings.min_alpha))
      continue;
    // Every pixel with o * exp(-q/2) >= min_alpha lies inside this axis-aligned box.
    const double qmax = 2.0 * std::log(s.opacity / settings.min_alpha);
    const double rx = std::sqrt(qmax * s.cov2d(0, 0)) + 1e-9;
    const double ry = std::sqrt(qmax * s.cov2d(1, 1)) + 1e-9;
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - rx)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(s.mean2d.x() + rx)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - ry)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(s.mean2d.y() + ry)));
    if (x0 > x1 || y0 > y1)
      continue;
    for (int ty = y0 / settings.tile_size; ty <= y1 / settings.tile_size; ++ty)
      for (int tx = x0 / settings.tile_size; tx <= x1 / settings.tile_size; ++tx)
        plan.tiles[static_cast<std::size_t>(ty) * plan.tiles_x + tx].push_back(idx);
  }
  return plan;
}

} // namespace detail

std::vector<Splat> prepare_splats(const GaussianSet &set, const CameraFrame &cam, int t, std::optional<int> t_corr,
                                  const RasterSettings &settings) {
  const int nf = set.bases.num_frames();
  if (nf > 0 && (t < 0 || t >= nf))
    throw ValidationError("prepare_splats: frame index out of range");
  if (t_corr && nf > 0 && (*t_corr < 0 || *t_corr >= nf))
    throw ValidationError("prepare_splats: correspondence frame out of range");

  // 99% probability mass of a 2D Gaussian: chi-square(2) quantile.
  const double q99 = -2.0 * std::log(0.01);
  const int w = cam.width(), h = cam.height();

  std::vector<Splat> splats;
  splats.reserve(set.statics.size() + set.rigids.size() + set.transients.size());
  auto emit = [&](Population pop, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      if (pop != Population::Static) {
        // Cheap gate-only test before the full evaluation.
        const double beta = pop == Population::Rigid ? set.rigids[i].beta : set.transients[i].beta;
        const double gamma = pop == Population::Rigid ? set.rigids[i].gamma : set.transients[i].gamma;
        const double logit_o = pop == Population::Rigid ? set.rigids[i].opacity_logit : set.transients[i].opacity_logit;
        if (gated_opacity(sigmoid(logit_o), set.alpha_gate, beta, gamma, t) < settings.cull_opacity)
          continue;
      }
      const auto e = detail::evaluate_gaussian(set, pop, i, cam, t, t_corr);
      if (!e || e->opacity < settings.cull_opacity)
        continue;
      const double rx = std::sqrt(q99 * e->cov2d(0, 0));
      const double ry = std::sqrt(q99 * e->cov2d(1, 1));
      if (e->mean2d.x() + rx < -0.5 || e->mean2d.x() - rx > w - 0.5 || e->mean2d.y() + ry < -0.5 ||
          e->mean2d.y() - ry > h - 0.5)
        continue;
      Splat s;
      s.mean2d = e->mean2d;
      s.cov2d = e->cov2d;
      s.depth = e->mean_cam.z();
      s.opacity = e->opacity;
      s.payload = e->payload;
      s.population = pop;
      s.index = static_cast<std::uint32_t>(i);
      splats.push_back(s);
    }
  };
  emit(Population::Static, set.statics.size());
  emit(Population::Rigid, set.rigids.size());
  emit(Population::Transient, set.transients.size());
  return splats;
}

double splat_falloff(const Splat &s, double px, double py) {
  return detail::raw_alpha(detail::to_conic(s), px, py);
}

RenderOutputs render(const GaussianSet &set, const CameraFrame &cam, int t, std::optional<int> t_corr,
                     const RasterSettings &settings) {
  const auto splats = prepare_splats(set, cam, t, t_corr, settings);
  return rasterize_forward(splats, cam, settings);
}

} // namespace dynsplat
