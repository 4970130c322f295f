#include <benchmark/benchmark.h>

#include "cueforge/eed.hpp"
#include "cueforge/rng.hpp"

namespace {

cueforge::RasterImage noise(int n, int channels) {
  cueforge::Rng rng(1);
  cueforge::RasterImage img(n, n, channels == 1 ? cueforge::ColorSpace::GRAY : cueforge::ColorSpace::RGB);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

void BM_DiffusionTensor(benchmark::State& state) {
  const auto img = noise(static_cast<int>(state.range(0)), 3);
  const cueforge::DiffusionParams p;
  for (auto _ : state) benchmark::DoNotOptimize(cueforge::diffusion_tensor(img, p));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_DiffusionTensor)->Arg(64)->Arg(256);

void BM_EedStep(benchmark::State& state) {
  const auto img = noise(static_cast<int>(state.range(0)), 3);
  const cueforge::DiffusionParams p;
  const auto tensor = cueforge::diffusion_tensor(img, p);
  for (auto _ : state) benchmark::DoNotOptimize(cueforge::eed_step(img, tensor, p));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_EedStep)->Arg(64)->Arg(256);

}  // namespace
