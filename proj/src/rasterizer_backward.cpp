// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "raster_internal.hpp"

#include <algorithm>
#include <map>

namespace dynsplat {

namespace {

struct Contribution {
  std::uint32_t local; ///< position inside the tile list
  double alpha;
  double q;
  double transmittance; ///< T before this splat
  bool clamped;
};

/// Gradient of a payload-like channel set, with alpha treated as an extra channel of value 1.
constexpr int kChannels = channel::kCount + 1;

void accumulate_tile(std::span<const Splat> splats, std::span<const detail::ConicSplat> conics,
                     const std::vector<std::uint32_t> &list, int x0, int y0, int x1, int y1,
                     const RenderGrads &grads, const RasterSettings &settings, std::vector<SplatGrad> &local) {
  std::vector<Contribution> hits;
  hits.reserve(list.size());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      hits.clear();
      double t = 1.0;
      for (std::uint32_t k = 0; k < list.size(); ++k) {
        double q = 0.0;
        const double raw = detail::raw_alpha(conics[list[k]], x, y, &q);
        if (raw < settings.min_alpha)
          continue;
        const double a = std::min(settings.max_alpha, raw);
        hits.push_back({k, a, q, t, raw > settings.max_alpha});
        t *= 1.0 - a;
        if (t < settings.min_transmittance)
          break;
      }
      if (hits.empty())
        continue;

      std::array<double, kChannels> g{};
      for (int c = 0; c < channel::kCount; ++c)
        g[c] = grads.channels.at(x, y, c);
      g[channel::kCount] = grads.alpha.at(x, y);

      std::array<double, kChannels> suffix{};
      for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
        const Splat &s = splats[list[it->local]];
        SplatGrad &sg = local[it->local];
        double g_alpha = 0.0;
        for (int c = 0; c < kChannels; ++c) {
          const double value = c < channel::kCount ? s.payload[c] : 1.0;
          g_alpha += g[c] * it->transmittance * (value - suffix[c]);
          suffix[c] = it->alpha * value + (1.0 - it->alpha) * suffix[c];
        }
        const double w = it->alpha * it->transmittance;
        for (int c = 0; c < channel::kCount; ++c)
          sg.payload[c] += g[c] * w;
        if (it->clamped)
          continue;
        const detail::ConicSplat &cs = conics[list[it->local]];
        sg.opacity += g_alpha * it->alpha / cs.opacity;
        const double g_q = -0.5 * g_alpha * it->alpha;
        const Vec2 d(x - cs.mx, y - cs.my);
        const Vec2 ad(cs.a * d.x() + cs.b * d.y(), cs.b * d.x() + cs.c * d.y());
        sg.mean2d += -2.0 * g_q * ad;
        sg.cov2d += -g_q * ad * ad.transpose();
      }
    }
}

void add_to(SplatGrad &dst, const SplatGrad &src) {
  dst.mean2d += src.mean2d;
  dst.cov2d += src.cov2d;
  dst.opacity += src.opacity;
  for (int c = 0; c < channel::kCount; ++c)
    dst.payload[c] += src.payload[c];
}

Vec3 get3(const std::array<double, channel::kCount> &p, int at) { return {p[at], p[at + 1], p[at + 2]}; }

/// Accumulated gradients on the blended rigid transform of one Gaussian at one frame.
struct FrameGrad {
  Vec3 position = Vec3::Zero(); ///< dL/d(A mu)
  Mat3 rotation = Mat3::Zero(); ///< dL/dA_rot beyond the position term
};

} // namespace

std::vector<SplatGrad> rasterize_backward_splats(std::span<const Splat> splats, const CameraFrame &cam,
                                                 const RenderOutputs &outputs, const RenderGrads &grads,
                                                 const RasterSettings &settings) {
  const int w = cam.width(), h = cam.height();
  if (!outputs.channels.same_shape(w, h) || !grads.channels.same_shape(w, h) || !grads.alpha.same_shape(w, h) ||
      grads.channels.channels != channel::kCount)
    throw MismatchedForward("rasterize_backward: gradient images do not match the camera");

  const detail::RasterPlan plan = detail::build_plan(splats, w, h, settings);
  std::vector<detail::ConicSplat> conics(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i)
    conics[i] = detail::to_conic(splats[i]);

  const int ntiles = plan.tiles_x * plan.tiles_y;
  const int ts = plan.tile_size;
  std::vector<std::vector<SplatGrad>> per_tile(ntiles);

#pragma omp parallel for schedule(dynamic, 1)
  for (int tile = 0; tile < ntiles; ++tile) {
    const auto &list = plan.tiles[tile];
    if (list.empty())
      continue;
    per_tile[tile].assign(list.size(), SplatGrad{});
    const int tx = tile % plan.tiles_x, ty = tile / plan.tiles_x;
    accumulate_tile(splats, conics, list, tx * ts, ty * ts, std::min(w, (tx + 1) * ts), std::min(h, (ty + 1) * ts),
                    grads, settings, per_tile[tile]);
  }

  // Fixed-order reduction keeps the result independent of the thread count.
  std::vector<SplatGrad> out(splats.size());
  for (int tile = 0; tile < ntiles; ++tile)
    for (std::size_t k = 0; k < per_tile[tile].size(); ++k)
      add_to(out[plan.tiles[tile][k]], per_tile[tile][k]);
  return out;
}

void backpropagate_splats(std::span<const Splat> splats, std::span<const SplatGrad> splat_grads,
                          const CameraFrame &cam, const GaussianSet &set, int t, std::optional<int> t_corr,
                          GradientBuffers &out) {
  if (splats.size() != splat_grads.size())
    throw ShapeMismatch("backpropagate_splats: one gradient per splat required");
  const Mat3 &wrot = cam.extrinsics.rotation;
  const auto &k = cam.intrinsics;
  const int nf = set.bases.num_frames();

  for (std::size_t si = 0; si < splats.size(); ++si) {
    const Splat &s = splats[si];
    const SplatGrad &sg = splat_grads[si];
    const auto e = detail::evaluate_gaussian(set, s.population, s.index, cam, t, t_corr);
    if (!e)
      continue;

    // Screen space -> camera space.
    const Mat2 g_cov = 0.5 * (sg.cov2d + sg.cov2d.transpose());
    Vec3 g_cam = e->jac.transpose() * sg.mean2d;
    g_cam.z() += sg.payload[channel::kDepth];

    const Mat3 g_cov_world = e->m.transpose() * g_cov * e->m;
    const Mat23 g_m = 2.0 * g_cov * e->m * e->cov_world;
    const Mat23 g_jac = g_m * wrot.transpose();
    const double x = e->mean_cam.x(), y = e->mean_cam.y(), z = e->mean_cam.z();
    const double iz2 = 1.0 / (z * z), iz3 = iz2 / z;
    g_cam.x() += g_jac(0, 2) * (-k.fx * iz2);
    g_cam.y() += g_jac(1, 2) * (-k.fy * iz2);
    g_cam.z() += g_jac(0, 0) * (-k.fx * iz2) + g_jac(0, 2) * (2.0 * k.fx * x * iz3) + g_jac(1, 1) * (-k.fy * iz2) +
                 g_jac(1, 2) * (2.0 * k.fy * y * iz3);
    const Vec3 g_mean_world = wrot.transpose() * g_cam;

    // Covariance -> world rotation and log-scales.
    const Vec3 s2 = e->scales.cwiseAbs2();
    Mat3 g_rot_world = 2.0 * g_cov_world * e->rot_world * s2.asDiagonal();
    const Mat3 rtgr = e->rot_world.transpose() * g_cov_world * e->rot_world;
    Vec3 g_log_scale;
    for (int a = 0; a < 3; ++a)
      g_log_scale[a] = 2.0 * s2[a] * rtgr(a, a);
    g_rot_world.col(e->normal_axis) += e->normal_sign * get3(sg.payload, channel::kNormal);

    // Opacity and temporal gate.
    const double sig = e->base_opacity;
    const double g_logit = sg.opacity * sig * (1.0 - sig) * e->gate;
    const double g_gate = sg.opacity * sig;

    auto fill_core = [&](StaticGaussian &g, const Mat3 &g_rot_canonical) {
      g.log_scale += g_log_scale;
      g.opacity_logit += g_logit;
      g.color += get3(sg.payload, channel::kColor);
      const StaticGaussian *src = nullptr;
      switch (s.population) {
      case Population::Static:
        src = &set.statics[s.index];
        break;
      case Population::Rigid:
        src = &set.rigids[s.index];
        break;
      case Population::Transient:
        src = &set.transients[s.index];
        break;
      }
      g.quat += quat_to_matrix_backward(src->quat, g_rot_canonical);
    };
    auto gate_grads = [&](double beta, double gamma, double &g_beta, double &g_gamma) {
      (void)beta;
      const double dgate = set.alpha_gate * e->gate * (1.0 - e->gate) * g_gate;
      g_beta += dgate;
      const double dt = t - gamma;
      g_gamma += dgate * (dt > 0.0 ? 1.0 : (dt < 0.0 ? -1.0 : 0.0));
    };

    switch (s.population) {
    case Population::Static: {
      StaticGaussian &g = out.statics[s.index];
      g.mean += g_mean_world + get3(sg.payload, channel::kCorr);
      fill_core(g, g_rot_world);
      break;
    }
    case Population::Transient: {
      const TransientGaussian &src = set.transients[s.index];
      TransientGaussian &g = out.transients[s.index];
      const Vec3 g_corr = get3(sg.payload, channel::kCorr);
      const double tc = t_corr ? *t_corr : t;
      g.mean += g_mean_world + g_corr;
      g.velocity += g_mean_world * (t - src.gamma) + g_corr * (tc - src.gamma) + get3(sg.payload, channel::kVelFwd) +
                    get3(sg.payload, channel::kVelBwd);
      g.gamma -= (g_mean_world + g_corr).dot(src.velocity);
      fill_core(g, g_rot_world);
      gate_grads(src.beta, src.gamma, g.beta, g.gamma);
      break;
    }
    case Population::Rigid: {
      const RigidGaussian &src = set.rigids[s.index];
      RigidGaussian &g = out.rigids[s.index];
      std::map<int, FrameGrad> frames;
      frames[t].position += g_mean_world;
      const SE3Transform at = blend_bases(src.weights, set.bases, t);
      const Mat3 r_canon = e->rot_canonical;
      frames[t].rotation += g_rot_world * r_canon.transpose();
      const VelocityFrames vf = velocity_frames(t, nf);
      const Vec3 g_vf = get3(sg.payload, channel::kVelFwd);
      const Vec3 g_vb = get3(sg.payload, channel::kVelBwd);
      frames[vf.fwd_b].position += g_vf;
      frames[vf.fwd_a].position -= g_vf;
      frames[vf.bwd_b].position += g_vb;
      frames[vf.bwd_a].position -= g_vb;
      frames[t_corr ? *t_corr : t].position += get3(sg.payload, channel::kCorr);

      fill_core(g, at.rotation.transpose() * g_rot_world);
      gate_grads(src.beta, src.gamma, g.beta, g.gamma);

      const int nb = set.bases.num_bases();
      for (const auto &[f, fg] : frames) {
        Vec6 r6 = Vec6::Zero();
        Vec3 tr = Vec3::Zero();
        for (int j = 0; j < nb; ++j) {
          const SE3Transform &b = set.bases.at(j, f);
          r6.head<3>() += src.weights[j] * b.rotation.col(0);
          r6.tail<3>() += src.weights[j] * b.rotation.col(1);
          tr += src.weights[j] * b.translation;
        }
        const Rotation6D blended = Rotation6D::from_vector(r6);
        const Mat3 a_rot = rot6d_to_matrix(blended);
        g.mean += a_rot.transpose() * fg.position;
        const Mat3 g_arot = fg.rotation + fg.position * src.mean.transpose();
        const Vec6 g_r6 = rot6d_backward(blended, g_arot);
        const Vec3 &g_tr = fg.position;
        for (int j = 0; j < nb; ++j) {
          const SE3Transform &b = set.bases.at(j, f);
          Vec6 bj;
          bj << b.rotation.col(0), b.rotation.col(1);
          g.weights[j] += g_r6.dot(bj) + g_tr.dot(b.translation);
          const std::size_t bi = static_cast<std::size_t>(j) * nf + f;
          out.basis_rotation[bi] += src.weights[j] * g_r6;
          out.basis_translation[bi] += src.weights[j] * g_tr;
        }
      }
      break;
    }
    }
  }
}

GradientBuffers rasterize_backward(std::span<const Splat> splats, const CameraFrame &cam,
                                   const RenderOutputs &outputs, const RenderGrads &grads, const GaussianSet &set,
                                   int t, std::optional<int> t_corr, const RasterSettings &settings) {
  const std::vector<SplatGrad> sg = rasterize_backward_splats(splats, cam, outputs, grads, settings);
  GradientBuffers out = GradientBuffers::zeros_like(set);
  backpropagate_splats(splats, sg, cam, set, t, t_corr, out);
  return out;
}

} // namespace dynsplat
