#include <benchmark/benchmark.h>

#include "ppv/conjugate.hpp"
#include "ppv/decompose.hpp"

using namespace ppv;

namespace {

HierarchicalModel grid_model(std::size_t k, std::size_t levels) {
  RngStream rng(17);
  std::vector<FactorSpec> factors;
  std::size_t cells = 1;
  std::size_t rows = 1;
  for (std::size_t j = 0; j < k; ++j) {
    FactorSpec f;
    f.name = "v" + std::to_string(j + 1);
    for (std::size_t l = 0; l < levels; ++l) f.levels.push_back("l" + std::to_string(l));
    f.prior_rows.assign(rows, std::vector<double>(levels, 1.0 / static_cast<double>(levels)));
    factors.push_back(std::move(f));
    rows *= levels;
    cells *= levels;
  }
  std::vector<double> ps(cells);
  for (auto& p : ps) p = rng.uniform(0.05, 0.95);
  return HierarchicalModel(std::move(factors),
                           std::make_shared<BernoulliFixedBackend>(std::move(ps)));
}

}  // namespace

static void EnumeratePlans(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto plans = enumerate_plans(k);
    benchmark::DoNotOptimize(plans);
  }
}
BENCHMARK(EnumeratePlans)->DenseRange(2, 6);

static void CountPlans(benchmark::State& state) {
  for (auto _ : state) {
    auto n = count_plans(static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(n);
  }
}
BENCHMARK(CountPlans)->Arg(6)->Arg(12);

static void DecomposeExactThreeTerm(benchmark::State& state) {
  const auto levels = static_cast<std::size_t>(state.range(0));
  const auto model = grid_model(2, levels);
  const Dataset data({1.0, 0.0, 1.0}, {});
  const auto post = joint_posterior(model, data);
  const DecompositionPlan plan{{{0}, {1}}, {}, 2};
  for (auto _ : state) {
    auto result = decompose_exact(model, data, post, plan);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(DecomposeExactThreeTerm)->Arg(2)->Arg(4)->Arg(8);

static void DecomposeAllPlans(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto model = grid_model(k, 2);
  const Dataset data({1.0, 0.0}, {});
  const auto post = joint_posterior(model, data);
  const auto plans = enumerate_plans(k);
  for (auto _ : state) {
    for (const auto& plan : plans) {
      auto result = decompose_exact(model, data, post, plan);
      benchmark::DoNotOptimize(result);
    }
  }
}
BENCHMARK(DecomposeAllPlans)->DenseRange(2, 4);

static void DecomposeMonteCarlo(benchmark::State& state) {
  const auto outer = static_cast<std::size_t>(state.range(0));
  const auto model = grid_model(2, 3);
  const Dataset data({1.0, 0.0, 1.0}, {});
  const auto post = joint_posterior(model, data);
  const DecompositionPlan plan{{{0}, {1}}, {}, 2};
  for (auto _ : state) {
    auto result = decompose_mc(model, data, post, plan, {outer, 16}, 7);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(DecomposeMonteCarlo)->Arg(256)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
