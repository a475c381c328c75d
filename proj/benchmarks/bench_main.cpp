#include <benchmark/benchmark.h>

#include "splinediff/bspline.hpp"
#include "splinediff/conv.hpp"
#include "splinediff/denoiser.hpp"
#include "splinediff/diffusion.hpp"
#include "splinediff/kan.hpp"
#include "splinediff/metrics.hpp"

using namespace splinediff;

namespace {

void BM_BasisWindow(benchmark::State& state) {
  KnotGrid grid = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  double vals[kMaxSplineOrder + 1];
  double x = -2.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(basis_window(grid, x, vals));
    x += 0.013;
    if (x > 2.9) x = -2.9;
  }
}
BENCHMARK(BM_BasisWindow);

void BM_KanLayerForward(benchmark::State& state) {
  KnotGrid grid = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  KanLayer<float> layer(32, 32, grid);
  Rng rng(1);
  init_kan_layer(layer, rng);
  TensorF x({128, 32});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.normal());
  KanCache<float> cache;
  for (auto _ : state) {
    TensorF out = layer.forward(x, cache);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_KanLayerForward);

void BM_KanLayerBackward(benchmark::State& state) {
  KnotGrid grid = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  KanLayer<float> layer(32, 32, grid);
  Rng rng(1);
  init_kan_layer(layer, rng);
  TensorF x({128, 32});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.normal());
  TensorF gout({128, 32});
  for (std::size_t i = 0; i < gout.numel(); ++i) gout[i] = static_cast<float>(rng.normal());
  TensorF gin({128, 32});
  KanCache<float> cache;
  layer.forward(x, cache);
  for (auto _ : state) {
    layer.forward(x, cache);
    layer.backward(cache, gout, &gin);
    benchmark::DoNotOptimize(gin.data());
  }
}
BENCHMARK(BM_KanLayerBackward);

void BM_Conv2dPatchEmbed(benchmark::State& state) {
  Rng rng(2);
  TensorF in = gaussian_sample<float>(rng, {8, 1, 16, 16});
  TensorF ker = gaussian_sample<float>(rng, {32, 1, 4, 4});
  for (auto _ : state) {
    TensorF out = conv2d(in, ker, 4, 0);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Conv2dPatchEmbed);

void BM_DenoiserForward(benchmark::State& state) {
  Denoiser<float> model(ModelDims{});
  model.init(3);
  Rng rng(4);
  TensorF zt = gaussian_sample<float>(rng, {8, 1, 16, 16});
  ConditionBundle<float> null;
  DenoiserTrace<float> trace;
  for (auto _ : state) {
    TensorF out = model.predict_noise(zt, null, 50, trace);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DenoiserForward);

void BM_DenoiserForwardBackward(benchmark::State& state) {
  Denoiser<float> model(ModelDims{});
  model.init(3);
  Rng rng(4);
  TensorF zt = gaussian_sample<float>(rng, {8, 1, 16, 16});
  TensorF gout = gaussian_sample<float>(rng, {8, 1, 16, 16});
  ConditionBundle<float> null;
  DenoiserTrace<float> trace;
  for (auto _ : state) {
    model.zero_grads();
    TensorF out = model.predict_noise(zt, null, 50, trace);
    model.backward(trace, gout);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DenoiserForwardBackward);

void BM_FrechetDistance32(benchmark::State& state) {
  Rng rng(5);
  std::vector<TensorF> a_clips, b_clips;
  for (int i = 0; i < 48; ++i) {
    a_clips.push_back(gaussian_sample<float>(rng, {2048}));
    b_clips.push_back(gaussian_sample<float>(rng, {2048}));
  }
  GaussianStats a = fit_gaussian_stats(a_clips, 1, 32);
  GaussianStats b = fit_gaussian_stats(b_clips, 1, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(frechet_distance(a, b));
  }
}
BENCHMARK(BM_FrechetDistance32);

}  // namespace

BENCHMARK_MAIN();
