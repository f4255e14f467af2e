#include <benchmark/benchmark.h>

#include <cmath>
#include <map>

#include "asiplab/fiber_system.hpp"
#include "asiplab/limits.hpp"
#include "asiplab/parallel.hpp"
#include "asiplab/thermo.hpp"
#include "asiplab/transfer.hpp"

using namespace asiplab;

namespace {

const Discretization& disc(int n_points) {
  static std::map<int, Discretization> cache;
  auto it = cache.find(n_points);
  if (it == cache.end()) {
    it = cache.emplace(n_points, Discretization(SystemSpec::default_system(), n_points, Interp::cubic)).first;
  }
  return it->second;
}

void BM_TransferApply(benchmark::State& state) {
  const auto& d = disc(static_cast<int>(state.range(0)));
  const BasePoint x = sample_base(d.spec().base_ptr(), 42, 0);
  const GridFunction u = GridFunction::sample(d.n_points(), Interp::cubic,
                                              [](double z) { return 1.0 + 0.5 * std::cos(kTwoPi * z); });
  for (auto _ : state) benchmark::DoNotOptimize(transfer_apply(d, x, u));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TransferApply)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

void BM_PullbackMeasure(benchmark::State& state) {
  set_thread_cap(1);
  ThermoEngine engine(disc(1024));
  const BasePoint x = sample_base(engine.spec().base_ptr(), 42, 1);
  for (auto _ : state) benchmark::DoNotOptimize(engine.pullback_measure(x, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_PullbackMeasure)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_ThermoState(benchmark::State& state) {
  set_thread_cap(1);
  ThermoEngine engine(disc(1024));
  const BasePoint x = sample_base(engine.spec().base_ptr(), 42, 2);
  for (auto _ : state) benchmark::DoNotOptimize(engine.state(x));
}
BENCHMARK(BM_ThermoState)->Unit(benchmark::kMillisecond);

void BM_PathSampler(benchmark::State& state) {
  set_thread_cap(1);
  static const ThermoEngine engine(disc(1024));
  static const GibbsPathSampler sampler(engine);
  const BasePoint x = sample_base(engine.spec().base_ptr(), 42, 3);
  Rng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.path(x, state.range(0), rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PathSampler)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
