// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/rasterizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dynsplat {

struct LearningRates {
  double mean = 0.00016;
  double scale = 0.005;
  double quat = 0.001;
  double opacity = 0.05;
  double color = 0.01;
  double beta = 0.001;
  double gamma = 0.001;
  double weights = 0.01;
  double basis = 0.0001;
  /// Transient velocity; negative means "same as mean".
  double velocity = -1.0;
  /// Multiplies every positional rate (means, velocities, basis parameters), as a scene-extent factor.
  double position_scale = 1.0;
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
  double min_beta = 0.01;
};

/// Which parameter groups take part in a step.
struct ActiveGroups {
  bool statics = true;
  bool rigids = true;
  bool transients = true;
  bool bases = true;
};

/// First/second moments of one parameter group; rows are Gaussians (or basis entries).
struct MomentRows {
  int dim = 0;
  std::vector<double> m;
  std::vector<double> v;
  std::vector<std::int64_t> steps;

  std::size_t rows() const { return steps.size(); }
  void resize(std::size_t rows);
  /// Removes the given rows (ascending indices).
  void erase(const std::vector<std::size_t> &rows);
};

class AdamOptimizer {
public:
  explicit AdamOptimizer(AdamSettings settings = {}) : settings_(settings) {}

  /// Grows or shrinks the moment tables to match the set; new rows start fresh.
  void sync(const GaussianSet &set);

  /// One bias-corrected Adam update followed by constraint projection.
  void step(GaussianSet &set, const GradientBuffers &grads, const LearningRates &lr, const ActiveGroups &active);

  /// Keeps moment rows aligned after transition_rigid_to_transient: migrated rigid rows are dropped
  /// and the appended transients start with zero moments.
  void on_transition(const std::vector<std::size_t> &migrated_rigids, const GaussianSet &set);

  std::size_t nonfinite_skips() const { return nonfinite_skips_; }
  std::size_t rejected_basis_steps() const { return rejected_basis_steps_; }

private:
  struct Population {
    std::vector<MomentRows> groups;
  };
  AdamSettings settings_;
  Population statics_, rigids_, transients_;
  MomentRows basis_rotation_{6, {}, {}, {}};
  MomentRows basis_translation_{3, {}, {}, {}};
  int num_bases_ = -1;
  std::size_t nonfinite_skips_ = 0;
  std::size_t rejected_basis_steps_ = 0;

  void update_rows(MomentRows &mom, std::size_t row, double *param, const double *grad, double lr);
};

/// Quaternion renormalization, unit-norm weights, beta floor, orthonormal bases.
void project_constraints(GaussianSet &set, double min_beta = 0.01);

} // namespace dynsplat
