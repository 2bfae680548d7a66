#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "oracles.hpp"
#include "ppv/conjugate.hpp"
#include "ppv/decompose.hpp"
#include "ppv/experiments.hpp"
#include "ppv/glm.hpp"

using namespace ppv;

namespace {

FactorSpec uniform_factor(const std::string& name, std::vector<std::string> levels) {
  FactorSpec f;
  f.name = name;
  f.levels = std::move(levels);
  f.prior_rows = {std::vector<double>(f.levels.size(), 1.0 / f.levels.size())};
  return f;
}

// Random discrete models over Bernoulli components, K in [1, 3].
HierarchicalModel random_discrete_model(std::uint64_t seed, std::size_t k) {
  RngStream rng(seed);
  std::vector<FactorSpec> factors;
  std::size_t cells = 1;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t levels = 2 + rng.uniform_index(2);
    FactorSpec f;
    f.name = "v" + std::to_string(j + 1);
    for (std::size_t l = 0; l < levels; ++l) f.levels.push_back("l" + std::to_string(l));
    std::size_t rows = 1;
    for (std::size_t e = 0; e < j; ++e) rows *= factors[e].level_count();
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> row(levels);
      double sum = 0.0;
      for (auto& w : row) { w = rng.uniform(0.05, 1.0); sum += w; }
      // occasionally zero out a level to exercise zero-mass paths
      if (levels > 2 && rng.bernoulli(0.3)) {
        sum -= row[0];
        row[0] = 0.0;
      }
      for (auto& w : row) w /= sum;
      f.prior_rows.push_back(row);
    }
    factors.push_back(std::move(f));
    cells *= levels;
  }
  std::vector<double> ps(cells);
  for (auto& p : ps) p = rng.uniform(0.05, 0.95);
  return HierarchicalModel(std::move(factors),
                           std::make_shared<BernoulliFixedBackend>(std::move(ps)));
}

Dataset bernoulli_data(std::uint64_t seed, std::size_t n) {
  RngStream rng(seed + 77);
  std::vector<double> ys;
  for (std::size_t i = 0; i < n; ++i) ys.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
  return Dataset(std::move(ys), {});
}

}  // namespace

TEST_CASE("total_variance: Bernoulli toy and discrete grid brute force") {
  auto [toy, data] = bernoulli_toy();
  const auto post = joint_posterior(toy, data);
  CHECK(total_variance(toy, data, post).variance == doctest::Approx(0.24).epsilon(1e-14));

  // 2x3 grid against an independent double sum
  FactorSpec v1 = uniform_factor("v1", {"a", "b"});
  v1.prior_rows = {{0.35, 0.65}};
  FactorSpec v2 = uniform_factor("v2", {"x", "y", "z"});
  const std::vector<double> ps = {0.1, 0.5, 0.9, 0.2, 0.4, 0.7};
  HierarchicalModel grid({v1, v2}, std::make_shared<BernoulliFixedBackend>(ps));
  const Dataset empty({}, {});
  const auto post2 = joint_posterior(grid, empty);
  std::vector<double> w(6), mu(6), var(6);
  for (std::size_t c = 0; c < 6; ++c) {
    w[c] = post2.weights[c];
    mu[c] = ps[c];
    var[c] = ps[c] * (1 - ps[c]);
  }
  const auto expected = oracles::mixture_moments(w, mu, var);
  CHECK(total_variance(grid, empty, post2).variance ==
        doctest::Approx(expected.variance).epsilon(1e-12));
}

TEST_CASE("exact decomposition of the Bernoulli toy: (0.2, 0.04)") {
  auto [toy, data] = bernoulli_toy();
  const auto post = joint_posterior(toy, data);
  const auto result = decompose_exact(toy, data, post, DecompositionPlan{{{0}}, {}, 1});
  REQUIRE(result.terms.size() == 2);
  CHECK(result.terms[0].value == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(result.terms[1].value == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(result.total == doctest::Approx(0.24).epsilon(1e-14));
  CHECK(result.conservation_ok());
  CHECK(result.terms[0].std_error == 0.0);
}

TEST_CASE("exact decomposition of the Normal-Normal model: (1.0, 0.2)") {
  auto [model, data] = normal_normal_example(1.0, 1.0, 4);
  const auto post = joint_posterior(model, data);
  const auto result = decompose_exact(model, data, post, DecompositionPlan{{{0}}, {}, 1});
  REQUIRE(result.terms.size() == 2);
  CHECK(result.terms[0].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.terms[1].value == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(result.total == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(result.conservation_ok());
}

TEST_CASE("totals are identical across plans, bit for bit") {
  const auto model = random_discrete_model(3, 2);
  const auto data = bernoulli_data(3, 4);
  const auto post = joint_posterior(model, data);
  const auto split = decompose_exact(model, data, post, parse_plan("1|2", 2));
  const auto condensed = decompose_exact(model, data, post, parse_plan("1,2", 2));
  const auto latent = decompose_exact(model, data, post, parse_plan("2", 2));
  CHECK(split.total == condensed.total);  // bitwise
  CHECK(split.total == latent.total);
}

TEST_CASE("conservation holds for every plan of randomized discrete models") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const std::size_t k = 1 + (seed % 3);
    const auto model = random_discrete_model(seed, k);
    const auto data = bernoulli_data(seed, 3);
    const auto post = joint_posterior(model, data);
    for (const auto& plan : enumerate_plans(k)) {
      const auto result = decompose_exact(model, data, post, plan);
      const double tol = 1e-10 * std::max(1.0, std::fabs(result.total));
      CHECK(std::fabs(result.residual) <= tol);
      CHECK(result.conservation_ok());
      for (const auto& term : result.terms) CHECK(term.value >= -1e-10);
      // proportions sum to 1 within the same tolerance
      double prop_sum = 0.0;
      for (double p : result.proportions()) prop_sum += p;
      CHECK(prop_sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("condensed and split plans agree as Prop-style identities") {
  // leading terms coincide; the condensed Var term equals the split middle
  // plus trailing terms
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto model = random_discrete_model(seed, 2);
    const auto data = bernoulli_data(seed, 5);
    const auto post = joint_posterior(model, data);
    const auto split = decompose_exact(model, data, post, parse_plan("1|2", 2));
    const auto condensed = decompose_exact(model, data, post, parse_plan("1,2", 2));
    CHECK(condensed.terms[0].value ==
          doctest::Approx(split.terms[0].value).epsilon(1e-12));
    CHECK(condensed.terms[1].value ==
          doctest::Approx(split.terms[1].value + split.terms[2].value).epsilon(1e-11));
    CHECK(condensed.total == doctest::Approx(split.total).epsilon(1e-14));
  }
}

TEST_CASE("plans referencing undeclared factors are rejected") {
  auto [toy, data] = bernoulli_toy();
  const auto post = joint_posterior(toy, data);
  CHECK_THROWS_AS(decompose_exact(toy, data, post, DecompositionPlan{{{0}, {1}}, {}, 2}),
                  PlanError);
}

TEST_CASE("parameter factor placement rules") {
  auto [model, data] = normal_normal_example(1.0, 1.0, 4);
  REQUIRE(model.has_parameter_factor());
  const auto post = joint_posterior(model, data);

  // a BMA-style model: one discrete factor + the parameter
  auto [bma, bma_data] = make_random_bma(3, 21);
  const auto bma_post = joint_posterior(bma, bma_data);

  SUBCASE("parameter conditioned before a discrete factor is invalid") {
    CHECK_THROWS_AS(decompose_exact(bma, bma_data, bma_post, parse_plan("2|1", 2)),
                    PlanError);
  }
  SUBCASE("parameter manifest with a latent discrete factor is invalid") {
    CHECK_THROWS_AS(decompose_exact(bma, bma_data, bma_post, parse_plan("2", 2)),
                    PlanError);
  }
  SUBCASE("the three valid forms work") {
    CHECK(decompose_exact(bma, bma_data, bma_post, parse_plan("1", 2)).conservation_ok());
    CHECK(decompose_exact(bma, bma_data, bma_post, parse_plan("1,2", 2)).conservation_ok());
    CHECK(decompose_exact(bma, bma_data, bma_post, parse_plan("1|2", 2)).conservation_ok());
  }
}

TEST_CASE("monte carlo: Bernoulli toy within 3 SE of (0.2, 0.04)") {
  auto [toy, data] = bernoulli_toy();
  const auto post = joint_posterior(toy, data);
  const auto result = decompose_mc(toy, data, post, DecompositionPlan{{{0}}, {}, 1},
                                   {4096, 1024}, 7);
  REQUIRE(result.terms.size() == 2);
  CHECK(std::fabs(result.terms[0].value - 0.2) <= 3.0 * result.terms[0].std_error);
  // the Var term enumerates both levels with exact weights: recovered exactly
  CHECK(result.terms[1].value == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(result.terms[1].std_error <= 1e-15);  // identical contributions, rounding only
  CHECK(result.conservation_ok());
  CHECK(result.engine == Engine::kMonteCarlo);
}

TEST_CASE("monte carlo: Normal-Normal within 3 SE of (1.0, 0.2)") {
  auto [model, data] = normal_normal_example(1.0, 1.0, 4);
  const auto post = joint_posterior(model, data);
  const auto result = decompose_mc(model, data, post, DecompositionPlan{{{0}}, {}, 1},
                                   {4096, 1024}, 7);
  REQUIRE(result.terms.size() == 2);
  // E Var term: the conditional variance is constant sigma^2, so exact
  CHECK(result.terms[0].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(result.terms[1].value - 0.2) <= 3.0 * result.terms[1].std_error);
  CHECK(result.terms[1].std_error > 0.0);
  CHECK(result.conservation_ok());
}

TEST_CASE("monte carlo conservation over 100 seeded replicates") {
  auto [toy, data] = bernoulli_toy();
  const auto post = joint_posterior(toy, data);
  std::size_t ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto result =
        decompose_mc(toy, data, post, DecompositionPlan{{{0}}, {}, 1}, {512, 16}, seed);
    if (result.conservation_ok()) ++ok;
    for (const auto& term : result.terms)
      CHECK(term.value >= -3.0 * term.std_error - 1e-12);
  }
  CHECK(ok >= 95);
}

TEST_CASE("monte carlo budget validation") {
  auto [toy, data] = bernoulli_toy();
  const auto post = joint_posterior(toy, data);
  CHECK_THROWS_AS(
      decompose_mc(toy, data, post, DecompositionPlan{{{0}}, {}, 1}, {0, 16}, 1),
      ValidationError);
  CHECK_THROWS_AS(
      decompose_mc(toy, data, post, DecompositionPlan{{{0}}, {}, 1}, {64, 1}, 1),
      ValidationError);
}

TEST_CASE("monte carlo determinism is independent of the thread budget") {
  auto [model, data] = make_random_bma(3, 5);
  const auto post = joint_posterior(model, data);
  const DecompositionPlan plan = parse_plan("1|2", 2);

  setenv("PPV_THREADS", "1", 1);
  const auto serial = decompose_mc(model, data, post, plan, {2048, 32}, 99);
  setenv("PPV_THREADS", "4", 1);
  const auto threaded = decompose_mc(model, data, post, plan, {2048, 32}, 99);
  unsetenv("PPV_THREADS");

  REQUIRE(serial.terms.size() == threaded.terms.size());
  for (std::size_t t = 0; t < serial.terms.size(); ++t) {
    CHECK(serial.terms[t].value == threaded.terms[t].value);  // bitwise
    CHECK(serial.terms[t].std_error == threaded.terms[t].std_error);
  }
}

TEST_CASE("negative MC term estimates are reported, not clamped") {
  // two components with identical means and draw-based summaries: the true
  // between-component spread is zero, so the unbiased cross-product estimate
  // fluctuates around zero and must be allowed to go negative
  RngStream rng(31);
  std::vector<std::vector<double>> mean_draws(2), var_draws(2);
  std::vector<ComponentSummary> summaries(2);
  for (std::size_t c = 0; c < 2; ++c) {
    for (int i = 0; i < 256; ++i) {
      mean_draws[c].push_back(rng.normal(0.5, 0.2));
      var_draws[c].push_back(0.1);
    }
    summaries[c] = {0.0, 0.5, 0.1, 0.04};
  }
  auto backend = std::make_shared<PrecomputedBackend>(summaries, mean_draws, var_draws,
                                                      true, 0, "test");
  HierarchicalModel model({uniform_factor("v", {"a", "b"})}, backend);
  const Dataset empty({}, {});
  const auto post = joint_posterior(model, empty);

  bool saw_negative = false;
  for (std::uint64_t seed = 1; seed <= 40 && !saw_negative; ++seed) {
    const auto result =
        decompose_mc(model, empty, post, DecompositionPlan{{{0}}, {}, 1}, {64, 8}, seed);
    if (result.terms[1].value < 0.0) saw_negative = true;
  }
  CHECK(saw_negative);
}

TEST_CASE("drop-term report") {
  SUBCASE("equal-mean toy: trailing Var term is exactly zero and flagged") {
    FactorSpec f = uniform_factor("v", {"a", "b"});
    HierarchicalModel model({f}, std::make_shared<BernoulliFixedBackend>(
                                     std::vector<double>{0.4, 0.4}));
    const Dataset empty({}, {});
    const auto post = joint_posterior(model, empty);
    const auto result = decompose_exact(model, empty, post, DecompositionPlan{{{0}}, {}, 1});
    CHECK(result.terms[1].value == doctest::Approx(0.0));
    const auto report = drop_term_report(result, 0.05);
    REQUIRE(report.entries.size() == 1);
    CHECK(report.entries[0].suggests_removal);
    CHECK(report.entries[0].removable_factors == std::vector<std::size_t>{0});
  }
  SUBCASE("nothing below threshold: empty report") {
    auto [toy, data] = bernoulli_toy();
    const auto post = joint_posterior(toy, data);
    const auto result = decompose_exact(toy, data, post, DecompositionPlan{{{0}}, {}, 1});
    CHECK(drop_term_report(result, 0.05).entries.empty());
  }
  SUBCASE("three-term case renders the reduced two-term expression") {
    const auto model = random_discrete_model(8, 2);
    const auto data = bernoulli_data(8, 3);
    const auto post = joint_posterior(model, data);
    auto result = decompose_exact(model, data, post, parse_plan("1|2", 2));
    // force the trailing term below threshold regardless of the draw
    const auto report = drop_term_report(result, 2.0);
    REQUIRE(report.entries.size() == 3);
    const auto& trailing = report.entries.back();
    CHECK(trailing.suggests_removal);
    CHECK(trailing.reduced_expression ==
          "E_{V2}Var(Y|V2,D) + Var_{V2}E(Y|V2,D)  (with V1 fixed)");
  }
}

TEST_CASE("monte carlo engine on draw-based summaries stays near the frozen truth") {
  // the backend's summaries are the fixed truth here; resampling its draws
  // must reproduce them within Monte Carlo error
  RngStream rng(77);
  std::vector<std::vector<double>> mean_draws(2), var_draws(2);
  std::vector<ComponentSummary> summaries(2);
  const double mu[2] = {0.3, 0.8}, sd[2] = {0.15, 0.1}, wv[2] = {0.2, 0.12};
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> ms;
    for (int i = 0; i < 20000; ++i) {
      ms.push_back(rng.normal(mu[c], sd[c]));
      var_draws[c].push_back(wv[c]);
    }
    mean_draws[c] = ms;
    summaries[c] = {0.0, pairwise_mean(ms), wv[c], sample_variance(ms)};
  }
  auto backend = std::make_shared<PrecomputedBackend>(summaries, mean_draws, var_draws,
                                                      true, 0, "test");
  HierarchicalModel model({uniform_factor("v", {"a", "b"})}, backend);
  const Dataset empty({}, {});
  const auto post = joint_posterior(model, empty);

  const auto exact = decompose_exact(model, empty, post, DecompositionPlan{{{0}}, {}, 1});
  const auto mc =
      decompose_mc(model, empty, post, DecompositionPlan{{{0}}, {}, 1}, {2048, 64}, 11);
  REQUIRE(exact.terms.size() == mc.terms.size());
  for (std::size_t t = 0; t < mc.terms.size(); ++t) {
    const double tol = std::max(3.0 * mc.terms[t].std_error, 1e-12);
    CHECK(std::fabs(mc.terms[t].value - exact.terms[t].value) <= tol);
  }
}
