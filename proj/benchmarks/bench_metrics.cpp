#include <benchmark/benchmark.h>

#include "cueforge/metrics.hpp"
#include "cueforge/rng.hpp"

namespace {

cueforge::LabelMask blocks(int n, int block, int classes) {
  cueforge::Rng rng(5);
  std::vector<cueforge::Label> ids(static_cast<std::size_t>((n / block + 1) * (n / block + 1)));
  for (auto& id : ids) id = static_cast<cueforge::Label>(rng.uniform() * classes);
  cueforge::LabelMask m(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.at(y, x) = ids[static_cast<std::size_t>(y / block) * (n / block + 1) + x / block];
  return m;
}

void BM_BoundaryMask(benchmark::State& state) {
  const auto gt = blocks(static_cast<int>(state.range(0)), 16, 5);
  const int radius = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(cueforge::boundary_mask(gt, radius));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_BoundaryMask)->Args({256, 4})->Args({512, 4})->Args({512, 16});

void BM_SegmentRecords(benchmark::State& state) {
  const auto gt = blocks(static_cast<int>(state.range(0)), 16, 5);
  const auto pred = blocks(static_cast<int>(state.range(0)), 12, 5);
  for (auto _ : state) benchmark::DoNotOptimize(cueforge::segment_records(gt, pred));
}
BENCHMARK(BM_SegmentRecords)->Arg(256);

}  // namespace
