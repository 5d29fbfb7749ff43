// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynsplat/dataset.hpp"
#include "dynsplat/initialization.hpp"
#include "dynsplat/losses.hpp"
#include "dynsplat/optimizer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dynsplat {

struct TrainConfig {
  int iters_total = 15000;
  int iters_static_warmup = 3000;
  int iters_rigid_warmup = 12000 - 3000;
  double transition_threshold = 2.0;
  int transition_check_every = 500;
  LearningRates learning_rates;
  int K = 10;
  double alpha_gate = 3.0;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  int checkpoint_every = 1000;
  /// Track-loss partner frame is drawn from [t - track_window, t + track_window].
  int track_window = 8;
  StaticInitOptions static_init;
  /// OpenMP threads; 0 keeps the runtime default.
  int threads = 0;

  void validate() const;
};

/// Parses a JSON object whose keys mirror the TrainConfig fields. Unknown keys are rejected.
TrainConfig parse_train_config(const std::string &json_text);
TrainConfig load_train_config(const std::filesystem::path &file);
std::string train_config_to_json(const TrainConfig &config);

struct TransitionEvent {
  int iteration = 0;
  std::size_t converted = 0;
  std::size_t rigids_after = 0;
  std::size_t transients_after = 0;
};

struct TrainResult {
  GaussianSet set;
  std::vector<std::string> log; ///< JSON lines
  std::vector<double> totals;   ///< total loss per iteration (NaN when skipped)
  std::vector<TransitionEvent> transitions;
  /// Origin object of every rigid Gaussian created by initialization, and which of them became transient.
  std::vector<std::int32_t> initial_rigid_origin;
  std::vector<bool> initial_rigid_converted;
  std::size_t nonfinite_skips = 0;
  std::size_t rejected_basis_steps = 0;
};

struct TrainOptions {
  /// Skip data-driven initialization and start from this set.
  std::optional<GaussianSet> initial;
  /// When set, the log, periodic checkpoints and final checkpoint are written here.
  std::optional<std::filesystem::path> out_dir;
};

TrainResult train(const SceneDataset &ds, const TrainConfig &config, const TrainOptions &options = {});

/// Precomputed dynamic masks when present, otherwise the object-wise motion pipeline.
std::vector<Mask> training_dynamic_masks(const SceneDataset &ds, std::uint64_t seed);

/// World-space normals from depth central differences between same-object neighbours, facing the camera.
ImageD normals_from_depth(const ImageD &depth, const ObjectIds &objects, const CameraFrame &cam, Mask &valid);

struct DurationHistogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  std::size_t total() const;
  std::string to_json() const;
};

/// Histogram of beta over rigid and transient Gaussians on [0, T]; values above T land in the last bin.
DurationHistogram duration_histogram(const GaussianSet &set, int bins);

/// Bar chart of the histogram as a binary PPM.
void write_histogram_plot(const DurationHistogram &h, const std::filesystem::path &file, int width = 480,
                          int height = 240);

} // namespace dynsplat
