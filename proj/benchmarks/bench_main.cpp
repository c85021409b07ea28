#include <benchmark/benchmark.h>

#include <cmath>

#include "sqseg/morphology.hpp"
#include "sqseg/network.hpp"
#include "sqseg/signal.hpp"
#include "sqseg/weights.hpp"

using namespace sqseg;

namespace {

// Ellipse with a hole, a workable stand-in for a tissue region.
BinaryMask region(int size) {
  BinaryMask m(size, size);
  const double c = size / 2.0, a = size * 0.4, b = size * 0.25;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x - c) / a, v = (y - c) / b;
      const double r = std::hypot(x - c * 1.1, y - c);
      if (u * u + v * v <= 1.0 && r > size * 0.06) m.set(x, y);
    }
  return m;
}

LabelMask scene(int size) {
  LabelMask gt(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) gt.set(x, y, 1 + (x / (size / 4) + 2 * (y / (size / 3))) % 5);
  return gt;
}

void BM_EfficientUNetForward(benchmark::State& state) {
  const auto spec = build_efficient_unet(Variant::B0);
  EfficientUNet net(spec, std::make_shared<const Weights>(init_weights(spec, 1)));
  const auto size = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  Tensor in({5, size, size}, 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(in, threads));
}
BENCHMARK(BM_EfficientUNetForward)->Args({128, 1})->Args({512, 1})->Args({512, 4})->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_GuidingSignal(benchmark::State& state) {
  const auto mask = region(static_cast<int>(state.range(0)));
  GenParams params;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    RngStream rng(seed++);
    benchmark::DoNotOptimize(generate_guiding_signal(mask, params, rng));
  }
}
BENCHMARK(BM_GuidingSignal)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_TrainingPair(benchmark::State& state) {
  const auto gt = scene(static_cast<int>(state.range(0)));
  GenParams params;
  for (auto _ : state) {
    ++params.seed;
    benchmark::DoNotOptimize(make_training_pair(gt, 1, params));
  }
}
BENCHMARK(BM_TrainingPair)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_DistanceTransform(benchmark::State& state) {
  const auto mask = region(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform(mask));
}
BENCHMARK(BM_DistanceTransform)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_Skeletonize(benchmark::State& state) {
  const auto mask = region(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(skeletonize(mask));
}
BENCHMARK(BM_Skeletonize)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
