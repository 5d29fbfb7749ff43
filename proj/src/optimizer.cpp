// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/optimizer.hpp"

#include <cmath>
#include <functional>

namespace dynsplat {

void MomentRows::resize(std::size_t rows) {
  m.resize(rows * dim, 0.0);
  v.resize(rows * dim, 0.0);
  steps.resize(rows, 0);
}

void MomentRows::erase(const std::vector<std::size_t> &rows) {
  std::size_t out = 0, next = 0;
  for (std::size_t r = 0; r < steps.size(); ++r) {
    if (next < rows.size() && rows[next] == r) {
      ++next;
      continue;
    }
    for (int d = 0; d < dim; ++d) {
      m[out * dim + d] = m[r * dim + d];
      v[out * dim + d] = v[r * dim + d];
    }
    steps[out] = steps[r];
    ++out;
  }
  resize(out);
}

namespace {

// Group order inside each population.
enum CoreGroup { kMean, kScale, kQuat, kOpacity, kColor, kCoreGroups };
enum RigidGroup { kWeights = kCoreGroups, kRigidBeta, kRigidGamma, kRigidGroups };
enum TransientGroup { kVelocity = kCoreGroups, kTransBeta, kTransGamma, kTransientGroups };

std::vector<MomentRows> make_groups(std::vector<int> dims) {
  std::vector<MomentRows> g;
  for (int d : dims)
    g.push_back({d, {}, {}, {}});
  return g;
}

bool all_finite(const double *p, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(p[i]))
      return false;
  return true;
}

} // namespace

void AdamOptimizer::sync(const GaussianSet &set) {
  const int k = set.bases.num_bases();
  if (statics_.groups.empty())
    statics_.groups = make_groups({3, 3, 4, 1, 3});
  if (transients_.groups.empty())
    transients_.groups = make_groups({3, 3, 4, 1, 3, 3, 1, 1});
  if (rigids_.groups.empty() || num_bases_ != k) {
    rigids_.groups = make_groups({3, 3, 4, 1, 3, k, 1, 1});
    num_bases_ = k;
  }
  for (auto &g : statics_.groups)
    g.resize(set.statics.size());
  for (auto &g : rigids_.groups)
    g.resize(set.rigids.size());
  for (auto &g : transients_.groups)
    g.resize(set.transients.size());
  basis_rotation_.resize(set.bases.size());
  basis_translation_.resize(set.bases.size());
}

void AdamOptimizer::on_transition(const std::vector<std::size_t> &migrated_rigids, const GaussianSet &set) {
  for (auto &g : rigids_.groups)
    g.erase(migrated_rigids);
  sync(set);
}

void AdamOptimizer::update_rows(MomentRows &mom, std::size_t row, double *param, const double *grad, double lr) {
  const int dim = mom.dim;
  const std::int64_t t = ++mom.steps[row];
  const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t));
  for (int d = 0; d < dim; ++d) {
    double &m = mom.m[row * dim + d];
    double &v = mom.v[row * dim + d];
    m = settings_.beta1 * m + (1.0 - settings_.beta1) * grad[d];
    v = settings_.beta2 * v + (1.0 - settings_.beta2) * grad[d] * grad[d];
    param[d] -= lr * (m / bc1) / (std::sqrt(v / bc2) + settings_.eps);
  }
}

namespace {

/// Accessor returning a pointer to one group's contiguous entries inside a Gaussian.
template <typename G>
using Getter = std::function<double *(G &)>;

template <typename G>
std::vector<Getter<G>> core_getters() {
  return {[](G &g) { return g.mean.data(); }, [](G &g) { return g.log_scale.data(); },
          [](G &g) { return g.quat.data(); }, [](G &g) { return &g.opacity_logit; },
          [](G &g) { return g.color.data(); }};
}

} // namespace

void AdamOptimizer::step(GaussianSet &set, const GradientBuffers &grads, const LearningRates &lr,
                         const ActiveGroups &active) {
  sync(set);
  const double pos = lr.position_scale;
  const double vel = (lr.velocity > 0.0 ? lr.velocity : lr.mean) * pos;
  const std::vector<double> core_lr = {lr.mean * pos, lr.scale, lr.quat, lr.opacity, lr.color};

  auto run = [&](auto &params, const auto &gparams, std::vector<MomentRows> &groups, const auto &getters,
                 const std::vector<double> &rates) {
    using G = typename std::decay_t<decltype(params)>::value_type;
    for (std::size_t gi = 0; gi < getters.size(); ++gi) {
      MomentRows &mom = groups[gi];
      bool finite = true;
      for (std::size_t r = 0; r < params.size() && finite; ++r)
        finite = all_finite(getters[gi](const_cast<G &>(gparams[r])), mom.dim);
      if (!finite) {
        ++nonfinite_skips_;
        continue;
      }
      for (std::size_t r = 0; r < params.size(); ++r)
        update_rows(mom, r, getters[gi](params[r]), getters[gi](const_cast<G &>(gparams[r])), rates[gi]);
    }
  };

  if (active.statics)
    run(set.statics, grads.statics, statics_.groups, core_getters<StaticGaussian>(), core_lr);

  // Basis and weight updates are rolled back together if any blended rotation degenerates.
  const MotionBases bases_before = set.bases;
  std::vector<Eigen::VectorXd> weights_before;
  for (const auto &g : set.rigids)
    weights_before.push_back(g.weights);

  if (active.rigids) {
    auto getters = core_getters<RigidGaussian>();
    getters.push_back([](RigidGaussian &g) { return g.weights.data(); });
    getters.push_back([](RigidGaussian &g) { return &g.beta; });
    getters.push_back([](RigidGaussian &g) { return &g.gamma; });
    std::vector<double> rates = core_lr;
    rates.insert(rates.end(), {lr.weights, lr.beta, lr.gamma});
    run(set.rigids, grads.rigids, rigids_.groups, getters, rates);
  }
  if (active.transients) {
    auto getters = core_getters<TransientGaussian>();
    getters.push_back([](TransientGaussian &g) { return g.velocity.data(); });
    getters.push_back([](TransientGaussian &g) { return &g.beta; });
    getters.push_back([](TransientGaussian &g) { return &g.gamma; });
    std::vector<double> rates = core_lr;
    rates.insert(rates.end(), {vel, lr.beta, lr.gamma});
    run(set.transients, grads.transients, transients_.groups, getters, rates);
  }
  if (active.bases && set.bases.size() > 0) {
    bool finite = true;
    for (std::size_t i = 0; i < set.bases.size() && finite; ++i)
      finite = grads.basis_rotation[i].allFinite() && grads.basis_translation[i].allFinite();
    if (!finite) {
      nonfinite_skips_ += 2;
    } else {
      const int nf = set.bases.num_frames();
      for (std::size_t i = 0; i < set.bases.size(); ++i) {
        SE3Transform &b = set.bases.at(static_cast<int>(i) / nf, static_cast<int>(i) % nf);
        const Vec6 r6_before = Rotation6D::from_matrix(b.rotation).as_vector();
        Vec6 r6 = r6_before;
        update_rows(basis_rotation_, i, r6.data(), grads.basis_rotation[i].data(), lr.basis * pos);
        update_rows(basis_translation_, i, b.translation.data(), grads.basis_translation[i].data(), lr.basis * pos);
        if (r6 == r6_before)
          continue;
        try {
          b.rotation = rot6d_to_matrix(Rotation6D::from_vector(r6));
        } catch (const DegenerateRotation6D &) {
          finite = false;
        }
      }
    }
    if (!finite) {
      set.bases = bases_before;
      for (std::size_t i = 0; i < set.rigids.size(); ++i)
        set.rigids[i].weights = weights_before[i];
      ++rejected_basis_steps_;
    }
  }
  project_constraints(set, settings_.min_beta);
}

void project_constraints(GaussianSet &set, double min_beta) {
  // Already-unit vectors are left alone so that repeated projection is an exact fixed point.
  constexpr double kUnitTol = 1e-14;
  auto fix_quat = [](Vec4 &q) {
    const double n = q.norm();
    if (std::abs(n - 1.0) > kUnitTol)
      q = n > 1e-12 ? Vec4(q / n) : Vec4(1, 0, 0, 0);
  };
  for (auto &g : set.statics)
    fix_quat(g.quat);
  for (auto &g : set.rigids) {
    fix_quat(g.quat);
    const double n = g.weights.norm();
    if (n > 1e-12 && std::abs(n - 1.0) > kUnitTol)
      g.weights /= n;
    g.beta = std::max(g.beta, min_beta);
  }
  for (auto &g : set.transients) {
    fix_quat(g.quat);
    g.beta = std::max(g.beta, min_beta);
  }
}

} // namespace dynsplat
