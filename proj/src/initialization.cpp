// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/initialization.hpp"

#include "dynsplat/sceneflow.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dynsplat {

Mask dilate(const Mask &m, int radius) {
  Mask out(m.width, m.height, 1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy)
        for (int dx = -radius; dx <= radius && !hit; ++dx) {
          const int xx = x + dx, yy = y + dy;
          hit = xx >= 0 && yy >= 0 && xx < m.width && yy < m.height && m.at(xx, yy);
        }
      out.at(x, y) = hit;
    }
  return out;
}

std::vector<StaticGaussian> init_static(const SceneDataset &ds, std::span<const Mask> dyn_masks,
                                        const StaticInitOptions &options) {
  const int nf = ds.num_frames();
  if (static_cast<int>(dyn_masks.size()) != nf)
    throw ShapeMismatch("init_static: one dynamic mask per frame required");
  const int stride = std::max(1, options.stride);
  const int count = std::clamp(options.frames_sampled, 1, nf);
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> offset(0, stride - 1);

  std::vector<StaticGaussian> out;
  for (int s = 0; s < count; ++s) {
    const int f = count == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(s) * (nf - 1) / (count - 1)));
    const Mask blocked = dilate(dyn_masks[f], 1);
    const CameraFrame &cam = ds.cameras[f];
    for (int cy = 0; cy < ds.height(); cy += stride)
      for (int cx = 0; cx < ds.width(); cx += stride) {
        const int x = std::min(cx + offset(rng), ds.width() - 1);
        const int y = std::min(cy + offset(rng), ds.height() - 1);
        const double d = ds.depth[f].at(x, y);
        if (blocked.at(x, y) || !depth_is_valid(d))
          continue;
        StaticGaussian g;
        g.mean = unproject(Vec2(x, y), d, cam);
        g.log_scale = Vec3::Constant(std::log(d / cam.intrinsics.fx * stride));
        g.opacity_logit = logit(0.5);
        for (int c = 0; c < 3; ++c)
          g.color[c] = ds.images[f].at(x, y, c);
        out.push_back(g);
      }
  }
  if (out.empty())
    throw EmptyStaticRegion();
  return out;
}

std::vector<LiftedTrack> lift_tracks(const TrackSet &tracks, std::span<const ImageD> depth,
                                     std::span<const CameraFrame> cams) {
  std::vector<LiftedTrack> out(tracks.n);
  for (int i = 0; i < tracks.n; ++i) {
    LiftedTrack &lt = out[i];
    lt.points.assign(tracks.t, Vec3::Zero());
    lt.visible.assign(tracks.t, false);
    for (int f = 0; f < tracks.t; ++f) {
      if (!tracks.visible(i, f))
        continue;
      const double u = tracks.u(i, f), v = tracks.v(i, f);
      const int x = static_cast<int>(std::lround(u)), y = static_cast<int>(std::lround(v));
      if (x < 0 || y < 0 || x >= depth[f].width || y >= depth[f].height)
        continue;
      const double d = depth[f].at(x, y);
      if (!depth_is_valid(d))
        continue;
      lt.points[f] = unproject(Vec2(u, v), d, cams[f]);
      lt.visible[f] = true;
      if (lt.first < 0)
        lt.first = f;
      lt.last = f;
    }
  }
  return out;
}

SE3Transform fit_rigid(std::span<const Vec3> p, std::span<const Vec3> q, std::span<const double> weights) {
  double wsum = 0.0;
  Vec3 cp = Vec3::Zero(), cq = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    wsum += weights[i];
    cp += weights[i] * p[i];
    cq += weights[i] * q[i];
  }
  if (!(wsum > 0.0))
    return SE3Transform::identity();
  cp /= wsum;
  cq /= wsum;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i)
    h += weights[i] * (q[i] - cq) * (p[i] - cp).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return {r, cq - r * cp};
}

std::vector<int> kmeans(const std::vector<Eigen::VectorXd> &rows, int k, int iterations, std::uint64_t seed) {
  const std::size_t n = rows.size();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw InsufficientTracks("kmeans: need at least k rows");
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(rows[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (rows[i] - centers.back()).squaredNorm());
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= dist[pick];
        if (r <= 0.0 && dist[pick] > 0.0)
          break;
      }
    } else {
      pick = centers.size() % n;
    }
    centers.push_back(rows[pick]);
  }

  std::vector<int> label(n, 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (rows[i] - centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      changed |= label[i] != best;
      label[i] = best;
    }
    std::vector<Eigen::VectorXd> sum(k, Eigen::VectorXd::Zero(rows[0].size()));
    std::vector<int> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[label[i]] += rows[i];
      ++cnt[label[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (cnt[c] > 0) {
        centers[c] = sum[c] / cnt[c];
        continue;
      }
      // Empty cluster: restart it at the row farthest from its center.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (rows[i] - centers[label[i]]).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      centers[c] = rows[far];
      label[far] = c;
      changed = true;
    }
    if (!changed && it > 0)
      break;
  }
  return label;
}

RigidInit init_rigid_from_tracks(const SceneDataset &ds, std::span<const Mask> dyn_masks, int num_bases,
                                 std::uint64_t seed) {
  const int nf = ds.num_frames();
  if (static_cast<int>(dyn_masks.size()) != nf)
    throw ShapeMismatch("init_rigid_from_tracks: one dynamic mask per frame required");
  const std::vector<LiftedTrack> lifted = lift_tracks(ds.tracks, ds.depth, ds.cameras);

  // Dynamic tracks: most visible samples fall inside the dynamic masks.
  std::vector<int> dyn;
  for (int i = 0; i < ds.tracks.n; ++i) {
    if (lifted[i].first < 0)
      continue;
    int inside = 0, seen = 0;
    for (int f = 0; f < nf; ++f) {
      if (!lifted[i].visible[f])
        continue;
      ++seen;
      const int x = static_cast<int>(std::lround(ds.tracks.u(i, f)));
      const int y = static_cast<int>(std::lround(ds.tracks.v(i, f)));
      inside += dyn_masks[f].at(x, y) != 0;
    }
    if (2 * inside > seen)
      dyn.push_back(i);
  }
  if (num_bases < 1 || static_cast<int>(dyn.size()) < num_bases)
    throw InsufficientTracks("init_rigid_from_tracks: " + std::to_string(dyn.size()) + " dynamic tracks for " +
                             std::to_string(num_bases) + " bases");

  RigidInit out;
  std::vector<int> visible_count(nf, 0);
  for (int i : dyn)
    for (int f = 0; f < nf; ++f)
      visible_count[f] += lifted[i].visible[f];
  out.canonical_frame = static_cast<int>(std::max_element(visible_count.begin(), visible_count.end()) -
                                         visible_count.begin());
  const int tc = out.canonical_frame;

  // Fill invisible frames with the nearest visible position.
  std::vector<std::vector<Vec3>> filled;
  for (int i : dyn) {
    const LiftedTrack &lt = lifted[i];
    std::vector<Vec3> p(nf);
    for (int f = 0; f < nf; ++f) {
      int best = -1;
      for (int d = 0; d < nf && best < 0; ++d) {
        if (f - d >= 0 && lt.visible[f - d])
          best = f - d;
        else if (f + d < nf && lt.visible[f + d])
          best = f + d;
      }
      p[f] = lt.points[best];
    }
    filled.push_back(std::move(p));
  }

  std::vector<Eigen::VectorXd> rows;
  for (const auto &p : filled) {
    Eigen::VectorXd r(3 * nf);
    for (int f = 0; f < nf; ++f)
      r.segment<3>(3 * f) = p[f] - p[tc];
    rows.push_back(std::move(r));
  }
  out.cluster = kmeans(rows, num_bases, 50, seed);

  out.bases = MotionBases(num_bases, nf);
  for (int j = 0; j < num_bases; ++j) {
    std::vector<std::size_t> members;
    for (std::size_t m = 0; m < dyn.size(); ++m)
      if (out.cluster[m] == j)
        members.push_back(m);
    for (int f = 0; f < nf; ++f) {
      std::vector<Vec3> p, q;
      std::vector<double> w;
      for (std::size_t m : members) {
        const LiftedTrack &lt = lifted[dyn[m]];
        p.push_back(filled[m][tc]);
        q.push_back(filled[m][f]);
        w.push_back(lt.visible[f] && lt.visible[tc] ? 1.0 : 1e-3);
      }
      SE3Transform t;
      if (members.size() >= 3) {
        t = fit_rigid(p, q, w);
      } else {
        Vec3 shift = Vec3::Zero();
        for (std::size_t a = 0; a < p.size(); ++a)
          shift += q[a] - p[a];
        t.translation = shift / static_cast<double>(std::max<std::size_t>(1, p.size()));
      }
      if (f == tc)
        t = SE3Transform::identity();
      out.bases.at(j, f) = t;
    }
  }

  for (std::size_t m = 0; m < dyn.size(); ++m) {
    const int i = dyn[m];
    const LiftedTrack &lt = lifted[i];
    const int f0 = lt.first;
    RigidGaussian g;
    g.weights = Eigen::VectorXd::Zero(num_bases);
    g.weights[out.cluster[m]] = 1.0;
    g.mean = out.bases.at(out.cluster[m], f0).inverse().apply(lt.points[f0]);
    g.gamma = 0.5 * (lt.first + lt.last);
    g.beta = std::max(0.5, 0.5 * (lt.last - lt.first));

    // Isotropic scale from the nearest lifted neighbour at the same frame.
    const double depth = ds.cameras[f0].world_to_camera(lt.points[f0]).z();
    const double footprint = depth / ds.cameras[f0].intrinsics.fx;
    double nn = std::numeric_limits<double>::infinity();
    for (int other : dyn)
      if (other != i && lifted[other].visible[f0])
        nn = std::min(nn, (lifted[other].points[f0] - lt.points[f0]).norm());
    const double s = std::clamp(0.6 * nn, footprint, 4.0 * footprint);
    g.log_scale = Vec3::Constant(std::log(s));
    g.opacity_logit = logit(0.5);
    const int x = static_cast<int>(std::lround(ds.tracks.u(i, f0)));
    const int y = static_cast<int>(std::lround(ds.tracks.v(i, f0)));
    for (int c = 0; c < 3; ++c)
      g.color[c] = ds.images[f0].at(x, y, c);
    int best_id = 0;
    best_id = ds.objects[f0].at(x, y);
    g.origin = best_id;
    out.gaussians.push_back(g);
    out.track_ids.push_back(i);
  }
  return out;
}

} // namespace dynsplat
