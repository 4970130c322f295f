#include <benchmark/benchmark.h>

#include "cueforge/mlp.hpp"
#include "cueforge/rng.hpp"

namespace {

void BM_MlpForward(benchmark::State& state) {
  cueforge::Rng rng(7);
  const auto model = cueforge::init_mlp(cueforge::MlpSpec::parse("3,16,19"), rng);
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::vector<double> features(rows * 3);
  for (double& v : features) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(cueforge::forward(model, features, rows));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(1024)->Arg(65536);

void BM_LossAndGrad(benchmark::State& state) {
  cueforge::Rng rng(8);
  const auto model = cueforge::init_mlp(cueforge::MlpSpec::parse("3,16,19"), rng);
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::vector<double> features(rows * 3);
  std::vector<cueforge::Label> labels(rows);
  for (double& v : features) v = rng.uniform();
  for (std::size_t i = 0; i < rows; ++i) labels[i] = static_cast<cueforge::Label>(i % 19);
  for (auto _ : state) benchmark::DoNotOptimize(cueforge::loss_and_grad(model, features, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrad)->Arg(1024);

}  // namespace
