#include <benchmark/benchmark.h>

#include "cueforge/rng.hpp"
#include "cueforge/texture.hpp"

namespace {

void BM_RasterizeVoronoi(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto seeds = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    cueforge::Rng rng(3);
    benchmark::DoNotOptimize(cueforge::rasterize_voronoi(n, n, seeds, rng));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_RasterizeVoronoi)->Args({128, 8})->Args({512, 34})->Args({512, 256});

}  // namespace
