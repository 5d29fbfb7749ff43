// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

// Tiled rasterizer against the serial brute-force reference.

#include "dynsplat/rasterizer.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace dynsplat;

namespace {

struct Scene {
  CameraFrame cam;
  std::vector<Splat> splats;
};

Scene make_scene(int size, int count) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene s;
  s.cam.intrinsics = {double(size), double(size), (size - 1) / 2.0, (size - 1) / 2.0, size, size};
  for (int i = 0; i < count; ++i) {
    Splat p;
    p.mean2d = Vec2(u(rng) * size, u(rng) * size);
    const double a = 0.5 + 4.0 * u(rng), b = 0.5 + 4.0 * u(rng), th = M_PI * u(rng);
    Mat2 r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    p.cov2d = r * Vec2(a * a, b * b).asDiagonal() * r.transpose() + 0.3 * Mat2::Identity();
    p.depth = 1.0 + 9.0 * u(rng);
    p.opacity = 0.05 + 0.85 * u(rng);
    for (double &v : p.payload)
      v = u(rng);
    p.index = static_cast<std::uint32_t>(i);
    s.splats.push_back(p);
  }
  return s;
}

void BM_Tiled(benchmark::State &state) {
  const Scene s = make_scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(rasterize_forward(s.splats, s.cam));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_Reference(benchmark::State &state) {
  const Scene s = make_scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(rasterize_reference(s.splats, s.cam));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

} // namespace

BENCHMARK(BM_Tiled)->Args({64, 200})->Args({128, 1000})->Args({256, 4000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Reference)->Args({64, 200})->Args({128, 1000})->Args({256, 4000})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
