// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/dynmask.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace dynsplat {

Mask occlusion_mask(const ImageD &fwd, const ImageD &bwd_next) {
  if (!fwd.same_shape(bwd_next) || fwd.channels != 2 || bwd_next.channels != 2)
    throw ShapeMismatch("occlusion_mask: flows must be H x W x 2 of equal size");
  const WarpResult wb = warp(bwd_next, fwd);
  Mask occ(fwd.width, fwd.height, 1);
  for (int y = 0; y < fwd.height; ++y)
    for (int x = 0; x < fwd.width; ++x) {
      if (!wb.valid.at(x, y)) {
        occ.at(x, y) = 1;
        continue;
      }
      const Vec2 f(fwd.at(x, y, 0), fwd.at(x, y, 1));
      const Vec2 b(wb.values.at(x, y, 0), wb.values.at(x, y, 1));
      occ.at(x, y) = (f + b).squaredNorm() > 0.01 * (f.squaredNorm() + b.squaredNorm()) + 0.5;
    }
  return occ;
}

double flow_weight(double uncertainty, bool occluded) {
  if (occluded)
    return 0.0;
  const double d = 1.0 + std::max(0.0, uncertainty);
  return 1.0 / (d * d);
}

double sampson_error(const Vec3 &x_left, const Vec3 &x_right, const Mat3 &f) {
  const double num = std::abs(x_left.dot(f * x_right));
  const double n1 = (f * x_left).norm();
  const double n2 = (f * x_right).norm();
  if (n1 < 1e-12 && n2 < 1e-12)
    throw ZeroDenominator();
  return num / std::sqrt(n1 * n1 + n2 * n2);
}

namespace {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 normalizing_transform(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto &p : pts)
    c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto &p : pts)
    d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 1e-12 ? std::sqrt(2.0) / d : 1.0;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

} // namespace

std::optional<Mat3> eight_point(std::span<const PixelMatch> matches) {
  if (matches.size() < 8)
    throw InsufficientMatches("eight_point needs at least 8 matches");
  std::vector<Vec2> l, r;
  for (const auto &m : matches) {
    l.push_back(m.left);
    r.push_back(m.right);
  }
  const Mat3 tl = normalizing_transform(l), tr = normalizing_transform(r);
  Eigen::MatrixXd a(std::max<std::size_t>(matches.size(), 9), 9);
  a.setZero();
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Vec3 pl = tl * l[i].homogeneous();
    const Vec3 pr = tr * r[i].homogeneous();
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v)
        a(static_cast<Eigen::Index>(i), u * 3 + v) = pl[u] * pr[v];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  // A one-dimensional null space is required for a unique solution.
  if (!(sv[7] > 1e-10 * sv[0]))
    return std::nullopt;
  const Eigen::VectorXd fv = svd.matrixV().col(8);
  Mat3 fn;
  fn << fv[0], fv[1], fv[2], fv[3], fv[4], fv[5], fv[6], fv[7], fv[8];
  Eigen::JacobiSVD<Mat3> s2(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d = s2.singularValues();
  d[2] = 0.0;
  fn = s2.matrixU() * d.asDiagonal() * s2.matrixV().transpose();
  Mat3 f = tl.transpose() * fn * tr;
  const double norm = f.norm();
  if (!(norm > 0.0) || !f.allFinite())
    return std::nullopt;
  return f / norm;
}

Mat3 estimate_fundamental(std::span<const PixelMatch> matches, int trials, std::uint64_t seed) {
  if (matches.size() < 8)
    throw InsufficientMatches("estimate_fundamental needs at least 8 matches, got " +
                              std::to_string(matches.size()));
  std::mt19937_64 rng(seed);
  std::vector<PixelMatch> pool(matches.begin(), matches.end());
  if (pool.size() > kMaxFundamentalMatches) {
    std::vector<PixelMatch> sub;
    sub.reserve(kMaxFundamentalMatches);
    std::sample(pool.begin(), pool.end(), std::back_inserter(sub), kMaxFundamentalMatches, rng);
    pool = std::move(sub);
  }

  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> errs(pool.size());
  std::optional<Mat3> best;
  double best_median = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    std::array<PixelMatch, 8> sample;
    // Partial Fisher-Yates: the first 8 slots of idx become the sample.
    for (std::size_t i = 0; i < 8; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      sample[i] = pool[idx[i]];
    }
    const auto f = eight_point(sample);
    if (!f)
      continue;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      try {
        errs[i] = sampson_error(pool[i].left.homogeneous(), pool[i].right.homogeneous(), *f);
      } catch (const ZeroDenominator &) {
        errs[i] = std::numeric_limits<double>::infinity();
      }
    }
    auto mid = errs.begin() + static_cast<std::ptrdiff_t>(errs.size() / 2);
    std::nth_element(errs.begin(), mid, errs.end());
    if (*mid < best_median) {
      best_median = *mid;
      best = f;
    }
  }
  if (!best)
    throw DegenerateConfiguration("every minimal sample was rank deficient");
  return *best;
}

double frame_motion_score(std::span<const double> weights, std::span<const double> errors) {
  if (weights.size() != errors.size())
    throw ShapeMismatch("frame_motion_score: weights and errors differ in length");
  double sw = 0.0, swe = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    sw += weights[i];
    swe += weights[i] * errors[i];
  }
  return sw < 1e-12 ? 0.0 : swe / sw;
}

ObjectScore object_motion_score(std::span<const double> per_frame, double eps_temp) {
  ObjectScore out;
  double sum = 0.0;
  for (std::size_t t = 0; t < per_frame.size(); ++t)
    if (per_frame[t] > eps_temp) {
      out.frames.push_back(static_cast<int>(t));
      sum += per_frame[t];
    }
  out.score = out.frames.empty() ? 0.0 : sum / static_cast<double>(out.frames.size());
  return out;
}

MotionScoreTable compute_motion_scores(std::span<const ImageD> flow_fwd, std::span<const ImageD> flow_bwd,
                                       std::span<const ImageD> uncertainty, std::span<const ObjectIds> objects,
                                       const DynMaskOptions &options) {
  const std::size_t nf = objects.size();
  if (nf < 2 || flow_fwd.size() != nf || flow_bwd.size() != nf)
    throw ShapeMismatch("compute_motion_scores: need >= 2 frames with matching flows and object maps");
  if (!uncertainty.empty() && uncertainty.size() != nf)
    throw ShapeMismatch("compute_motion_scores: uncertainty count mismatch");

  std::set<int> ids;
  for (const auto &o : objects)
    ids.insert(o.data.begin(), o.data.end());

  const std::size_t pairs = nf - 1;
  std::vector<std::map<int, double>> frame_scores(pairs);
  std::vector<std::string> failures(pairs);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t t = 0; t < pairs; ++t) {
    try {
      const ImageD &fwd = flow_fwd[t];
      const ObjectIds &obj = objects[t];
      if (!fwd.same_shape(obj) || !flow_bwd[t + 1].same_shape(obj))
        throw ShapeMismatch("compute_motion_scores: frame shapes differ");
      const Mask occ = occlusion_mask(fwd, flow_bwd[t + 1]);
      const int w = fwd.width, h = fwd.height;

      std::vector<PixelMatch> matches;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (!occ.at(x, y))
            matches.push_back({Vec2(x, y), Vec2(x + fwd.at(x, y, 0), y + fwd.at(x, y, 1))});
      // No epipolar geometry can be fit without parallax (static camera over a static or planar
      // scene); such a pair carries no motion evidence and scores every object 0.
      std::optional<Mat3> fit;
      try {
        fit = estimate_fundamental(matches, options.trials, options.seed + t);
      } catch (const DegenerateConfiguration &) {
      } catch (const InsufficientMatches &) {
      }
      if (!fit) {
        for (std::uint16_t id : obj.data)
          frame_scores[t][id] = 0.0;
        continue;
      }
      const Mat3 &f = *fit;

      std::map<int, std::pair<std::vector<double>, std::vector<double>>> per_object;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double u = uncertainty.empty() ? 0.0 : uncertainty[t].at(x, y);
          double wt = flow_weight(u, occ.at(x, y) != 0);
          double e = 0.0;
          if (wt > 0.0) {
            const Vec3 xl(x, y, 1.0), xr(x + fwd.at(x, y, 0), y + fwd.at(x, y, 1), 1.0);
            try {
              e = sampson_error(xl, xr, f);
            } catch (const ZeroDenominator &) {
              wt = 0.0;
            }
          }
          auto &slot = per_object[obj.at(x, y)];
          slot.first.push_back(wt);
          slot.second.push_back(e);
        }
      for (const auto &[id, we] : per_object)
        frame_scores[t][id] = frame_motion_score(we.first, we.second);
    } catch (const std::exception &e) {
      failures[t] = e.what();
    }
  }
  for (std::size_t t = 0; t < pairs; ++t)
    if (!failures[t].empty())
      throw DegenerateConfiguration("frame " + std::to_string(t) + ": " + failures[t]);

  MotionScoreTable table;
  table.eps_temp = options.eps_temp;
  double max_score = 0.0;
  for (int id : ids) {
    std::vector<double> s(pairs, 0.0);
    for (std::size_t t = 0; t < pairs; ++t) {
      auto it = frame_scores[t].find(id);
      if (it != frame_scores[t].end())
        s[t] = it->second;
    }
    table.objects[id] = object_motion_score(s, options.eps_temp);
    max_score = std::max(max_score, table.objects[id].score);
    table.per_frame[id] = std::move(s);
  }
  table.eps_dyn = options.eps_dyn ? *options.eps_dyn : max_score / 4.0;
  return table;
}

std::vector<int> dynamic_objects(const MotionScoreTable &table) {
  std::vector<int> out;
  for (const auto &[id, s] : table.objects)
    if (s.score > table.eps_dyn)
      out.push_back(id);
  return out;
}

std::vector<Mask> compose_dynamic_masks(const MotionScoreTable &table, std::span<const ObjectIds> objects) {
  const std::vector<int> dyn = dynamic_objects(table);
  const std::set<int> dyn_set(dyn.begin(), dyn.end());
  std::vector<Mask> out;
  out.reserve(objects.size());
  for (const auto &o : objects) {
    Mask m(o.width, o.height, 1);
    for (std::size_t i = 0; i < o.data.size(); ++i)
      m.data[i] = dyn_set.count(o.data[i]) ? 1 : 0;
    out.push_back(std::move(m));
  }
  return out;
}

double mask_iou(const Mask &a, const Mask &b) {
  if (!a.same_shape(b))
    throw ShapeMismatch("mask_iou: shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += (a.data[i] && b.data[i]);
    uni += (a.data[i] || b.data[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace dynsplat
