#include <benchmark/benchmark.h>

#include "ppv/glm.hpp"
#include "ppv/rng.hpp"

using namespace ppv;

namespace {

Dataset simulated(std::size_t n, std::size_t covariates) {
  RngStream rng(5);
  std::map<std::string, std::vector<double>> covs;
  std::vector<std::vector<double>*> cols;
  for (std::size_t j = 0; j < covariates; ++j) {
    auto& col = covs["x" + std::to_string(j + 1)];
    col.resize(n);
    cols.push_back(&col);
  }
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.2;
    for (std::size_t j = 0; j < covariates; ++j) {
      const double x = rng.normal();
      (*cols[j])[i] = x;
      eta += 0.4 * x;
    }
    ys[i] = static_cast<double>(rng.binomial(6, 1.0 / (1.0 + std::exp(-eta))));
  }
  return Dataset(std::move(ys), std::move(covs));
}

std::vector<std::string> names(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < d; ++j) out.push_back("x" + std::to_string(j + 1));
  return out;
}

}  // namespace

static void LogPosteriorEval(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto data = simulated(n, 3);
  const auto spec = make_glm_spec(Link::kLogit, names(3), 6, 10.0, data);
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(4, 0.1);
  for (auto _ : state) {
    auto lp = log_posterior(spec, beta);
    benchmark::DoNotOptimize(lp);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(LogPosteriorEval)->Arg(25)->Arg(100)->Arg(400);

static void LaplaceFitBench(benchmark::State& state) {
  const auto data = simulated(100, static_cast<std::size_t>(state.range(0)));
  const auto spec =
      make_glm_spec(Link::kLogit, names(static_cast<std::size_t>(state.range(0))), 6, 10.0, data);
  for (auto _ : state) {
    auto fit = laplace_fit(spec);
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(LaplaceFitBench)->Arg(1)->Arg(3);

static void MetropolisChain(benchmark::State& state) {
  const auto data = simulated(100, 2);
  const auto spec = make_glm_spec(Link::kLogit, names(2), 6, 10.0, data);
  const auto chain = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto draws = rw_metropolis(spec, chain, chain / 4, 0.0, 7);
    benchmark::DoNotOptimize(draws);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(chain));
}
BENCHMARK(MetropolisChain)->Arg(1000)->Arg(4000);

BENCHMARK_MAIN();
