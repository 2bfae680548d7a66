#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <cstdlib>

#include "oracles.hpp"
#include "ppv/conjugate.hpp"
#include "ppv/experiments.hpp"
#include "ppv/glm.hpp"
#include "ppv/model_io.hpp"

using namespace ppv;

TEST_CASE("challenger dataset: 23 rows, counts in range, CSV matches") {
  const auto data = challenger_dataset();
  REQUIRE(data.n() == 23);
  for (double y : data.responses()) {
    CHECK(y >= 0.0);
    CHECK(y <= 6.0);
  }
  CHECK(data.covariate("t").size() == 23);
  CHECK(data.covariate("s").size() == 23);

  const auto parsed = load_challenger_csv(challenger_csv_text());
  CHECK(parsed.responses() == data.responses());
  CHECK(parsed.covariate("t") == data.covariate("t"));
  CHECK(parsed.covariate("s") == data.covariate("s"));

  // the shipped CSV must not drift from the embedded record
  if (const char* data_dir = std::getenv("PPV_DATA_DIR")) {
    const auto shipped = read_file(std::string(data_dir) + "/challenger.csv");
    CHECK(shipped == challenger_csv_text());
  }
}

TEST_CASE("challenger run: conservation, ordering, and report shape") {
  // short chains keep this suite quick; the acceptance suite runs the
  // full-length configuration
  ChallengerConfig config;
  config.chain_length = 4000;
  config.burn_in = 1000;
  const auto report = run_challenger(config);

  REQUIRE(report.three_term.terms.size() == 3);
  CHECK(report.three_term.conservation_ok());
  const auto props = report.three_term.proportions();
  // middle (models) term largest, link term smallest by a wide margin
  CHECK(props[1] > props[0]);
  CHECK(props[1] > props[2]);
  CHECK(props[2] < 0.05);
  CHECK(report.three_term.terms[1].value >= 5.0 * report.three_term.terms[2].value);
  CHECK(report.three_term.total > 0.08);
  CHECK(report.three_term.total < 0.15);

  REQUIRE(report.model_table.size() == 24);
  double weight_sum = 0.0;
  for (const auto& row : report.model_table) weight_sum += row.weight;
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-10));
  // Table-1 numbering: m1 = logit with t, m24 = probit intercept-only
  CHECK(report.model_table[0].link == "L");
  CHECK(report.model_table[0].subset == "t");
  CHECK(report.model_table[23].link == "P");
  CHECK(report.model_table[23].subset == "none");

  // Draper's restricted two-term variant: both terms positive, conserved
  REQUIRE(report.restricted_two_term.terms.size() == 2);
  CHECK(report.restricted_two_term.conservation_ok());
  CHECK(report.restricted_two_term.terms[0].value > 0.0);
  CHECK(report.restricted_two_term.terms[1].value > 0.0);

  // the near-zero link term is flagged with a removal suggestion
  REQUIRE(report.drop_report.entries.size() >= 1);
  bool found = false;
  for (const auto& e : report.drop_report.entries)
    if (e.suggests_removal && e.removable_factors == std::vector<std::size_t>{0}) found = true;
  CHECK(found);

  // subset importance sums to one over the eight subsets
  REQUIRE(report.subset_importance.size() == 8);
  double total = 0.0;
  for (const auto& [label, p] : report.subset_importance) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("challenger weights: spot models checked against quadrature") {
  // the grid weights come from Laplace marginals; spot-check two models'
  // log marginals against direct quadrature on the O-ring data
  const Dataset data = challenger_dataset();
  const double prior_sd = ChallengerConfig{}.prior_sd;

  const auto intercept_spec = make_glm_spec(Link::kLogit, {}, 6, prior_sd, data);
  auto lp0 = [&](double b0) {
    Eigen::VectorXd b(1);
    b << b0;
    return log_posterior_value(intercept_spec, b);
  };
  const double peak0 = lp0(-2.5);
  const double quad0 =
      std::log(oracles::integrate([&](double b) { return std::exp(lp0(b) - peak0); },
                                  -8.0, 3.0, 1e-13)) + peak0;
  CHECK(std::fabs(laplace_log_marginal(intercept_spec) - quad0) < 1e-2);

  const auto t_spec = make_glm_spec(Link::kLogit, {"t"}, 6, prior_sd, data);
  const auto fit = laplace_fit(t_spec);
  auto lp1 = [&](double b0, double b1) {
    Eigen::VectorXd b(2);
    b << b0, b1;
    return log_posterior_value(t_spec, b);
  };
  const double peak1 = lp1(fit.mode[0], fit.mode[1]);
  const Eigen::MatrixXd cov = fit.neg_hessian.inverse();
  const double s0 = 9.0 * std::sqrt(cov(0, 0)), s1 = 9.0 * std::sqrt(cov(1, 1));
  const double quad1 =
      std::log(oracles::integrate2(
          [&](double a, double b) { return std::exp(lp1(a, b) - peak1); },
          fit.mode[0] - s0, fit.mode[0] + s0, [&](double) { return fit.mode[1] - s1; },
          [&](double) { return fit.mode[1] + s1; }, 1e-9)) + peak1;
  CHECK(std::fabs(fit.log_marginal - quad1) < 1e-2);
}

TEST_CASE("restricted challenger prior zeroes out the other 18 models") {
  ChallengerConfig config;
  config.restricted = true;
  const auto model = challenger_model(config);
  const std::array<std::size_t, 6> draper = {0, 3, 4, 6, 7, 14};  // m1,m4,m5,m7,m8,m15
  double prior_mass = 0.0;
  for (std::size_t c = 0; c < 24; ++c) {
    const double w = model.prior_weight(c);
    const bool in_set = std::find(draper.begin(), draper.end(), c) != draper.end();
    if (in_set) {
      CHECK(w == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    } else {
      CHECK(w == 0.0);
    }
    prior_mass += w;
  }
  CHECK(prior_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bma equivalence: totals agree, splits differ") {
  SUBCASE("two normal components") {
    std::vector<NormalKnownVarSpec> comps = {{1.0, 0.0, 1.0}, {1.5, 0.5, 0.8}};
    FactorSpec f{"model", {"M1", "M2"}, {{0.5, 0.5}}};
    HierarchicalModel model({f}, std::make_shared<NormalKnownVarBackend>(comps),
                            std::string("theta"));
    const Dataset data({0.2, 0.7, -0.1}, {});
    const auto report = bma_equivalence_check(model, data);
    CHECK(report.max_total_spread <= 1e-10 * std::max(1.0, report.three_term.total));
    CHECK(report.conditioned_on_model.conservation_ok());
    CHECK(report.conditioned_jointly.conservation_ok());
    CHECK(report.three_term.conservation_ok());
    // same total, different splits: the Hoeting form's E-Var term absorbs the
    // parameter variance that the three-term form separates out
    CHECK(report.conditioned_on_model.terms[0].value >
          report.three_term.terms[0].value);
  }

  SUBCASE("identical components make the between-model term zero") {
    std::vector<NormalKnownVarSpec> comps = {{1.0, 0.3, 0.9}, {1.0, 0.3, 0.9}};
    FactorSpec f{"model", {"M1", "M2"}, {{0.5, 0.5}}};
    HierarchicalModel model({f}, std::make_shared<NormalKnownVarBackend>(comps),
                            std::string("theta"));
    const Dataset data({0.4, -0.2}, {});
    const auto report = bma_equivalence_check(model, data);
    // trailing term of the model-conditioned form: Var_J E(Y | M_J, D) = 0
    CHECK(report.conditioned_on_model.terms[1].value == doctest::Approx(0.0));
  }

  SUBCASE("randomized instances match the brute-force mixture variance") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
      auto [model, data] = make_random_bma(3, seed);
      const auto post = joint_posterior(model, data);
      const auto cells = fit_all_cells(model, data);
      std::vector<double> w, mu, var;
      for (std::size_t c = 0; c < 3; ++c) {
        w.push_back(post.weights[c]);
        mu.push_back(cells[c].mean);
        var.push_back(cells[c].variance());
      }
      const auto expected = oracles::mixture_moments(w, mu, var);
      const auto report = bma_equivalence_check(model, data);
      CHECK(report.three_term.total == doctest::Approx(expected.variance).epsilon(1e-10));
      CHECK(report.max_total_spread <=
            1e-10 * std::max(1.0, std::fabs(report.three_term.total)));
    }
  }
}

TEST_CASE("variable set importance") {
  SUBCASE("single-level factor has probability one") {
    FactorSpec v1{"link", {"only"}, {{1.0}}};
    FactorSpec v2{"subset", {"a", "b"}, {{0.4, 0.6}}};
    HierarchicalModel model({v1, v2}, std::make_shared<BernoulliFixedBackend>(
                                          std::vector<double>{0.2, 0.5}));
    const Dataset empty({}, {});
    const auto post = joint_posterior(model, empty);
    const auto links = variable_set_importance(model, post, 0);
    REQUIRE(links.size() == 1);
    CHECK(links[0].second == doctest::Approx(1.0));
  }

  SUBCASE("2x2 toy with hand-set weights matches the hand computation") {
    FactorSpec v1{"model", {"m1", "m2"}, {{0.5, 0.5}}};
    FactorSpec v2{"subset", {"s1", "s2"}, {{0.5, 0.5}}};
    HierarchicalModel model({v1, v2}, std::make_shared<BernoulliFixedBackend>(
                                          std::vector<double>{0.2, 0.5, 0.7, 0.9}));
    const Dataset empty({}, {});
    auto post = joint_posterior(model, empty);
    post.weights = {0.10, 0.25, 0.30, 0.35};
    const auto subsets = variable_set_importance(model, post, 1);
    REQUIRE(subsets.size() == 2);
    // p(s1 | D) = p(m1)p(s1|m1) + p(m2)p(s1|m2) summed from the joint
    CHECK(subsets[0].second == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(subsets[1].second == doctest::Approx(0.60).epsilon(1e-12));
  }
}

TEST_CASE("sweep: smoke configuration has the right shape and determinism") {
  SweepConfig config;
  config.n_grid = {25, 50};
  config.replicates = 2;
  config.chain_length = 800;
  config.burn_in = 200;
  config.seed = 4242;

  const auto a = run_sweep(config);
  CHECK(a.failures == 0);
  CHECK(a.attempted == 4);
  REQUIRE(a.curves.size() == 2);
  CHECK(a.rows.size() == 2 * 2 * 3);  // grid points x replicates x terms

  for (const auto& p : a.curves) {
    double prop_sum = 0.0;
    for (double v : p.proportions) prop_sum += v;
    CHECK(prop_sum == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : p.values) CHECK(v >= 0.0);
    CHECK(p.total > 0.0);
  }

  // identical config + seed => identical CSV bytes
  const auto b = run_sweep(config);
  CHECK(sweep_rows_csv(a) == sweep_rows_csv(b));
  CHECK(sweep_values_csv(a) == sweep_values_csv(b));
  CHECK(sweep_proportions_csv(a) == sweep_proportions_csv(b));

  // csv headers per the documented layout
  CHECK(sweep_rows_csv(a).rfind("n,replicate,term_label,value,proportion\n", 0) == 0);
  CHECK(sweep_values_csv(a).rfind("n,predictions,models,links,total\n", 0) == 0);
}

TEST_CASE("sweep config validation") {
  SweepConfig bad;
  bad.n_grid = {50, 25};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.n_grid = {};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = SweepConfig{};
  bad.replicates = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("monte carlo terms on a small GLM grid match quadrature values") {
  // two links over one covariate; the oracle evaluates each model's
  // predictive moments by 2-d quadrature over its coefficient posterior and
  // assembles the terms with the same (exact) weights
  RngStream rng(2024);
  const int m = 6;
  const std::size_t n = 30;
  std::map<std::string, std::vector<double>> covs;
  auto& xs = covs["x1"];
  std::vector<double> ys;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    xs.push_back(x);
    ys.push_back(static_cast<double>(
        rng.binomial(m, 1.0 / (1.0 + std::exp(-(0.2 + 0.8 * x))))));
  }
  const Dataset data(ys, covs);

  FactorSpec link{"link", {"L", "P"}, {{0.5, 0.5}}};
  GlmGridConfig glm;
  glm.link_factor = 0;
  glm.fixed_covariates = {"x1"};
  glm.trials = m;
  glm.prior_sd = 2.5;
  glm.target = GlmTarget::kCount;
  glm.x_new = {{"x1", 0.8}};
  glm.chain_length = 60000;
  glm.burn_in = 8000;
  glm.seed = 99;
  std::vector<FactorSpec> factors = {link};
  HierarchicalModel model(factors, std::make_shared<GlmBackend>(factors, glm),
                          std::string("beta"));
  const auto fitted = materialize(model, data);
  const auto post = joint_posterior(fitted, data);

  // quadrature oracle per model: E[p], E[p^2], E[p(1-p)] at x_new
  std::vector<double> or_mean(2), or_within(2), or_between(2);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto* backend = dynamic_cast<const GlmBackend*>(&model.backend());
    REQUIRE(backend != nullptr);
    const auto spec = backend->spec_for_cell(c, data);
    const auto fit = laplace_fit(spec);
    const Eigen::VectorXd x = design_row_at(spec, glm.x_new);
    const Eigen::MatrixXd cov = fit.neg_hessian.inverse();
    const double s0 = 9.0 * std::sqrt(cov(0, 0)), s1 = 9.0 * std::sqrt(cov(1, 1));
    auto weight = [&](double b0, double b1) {
      Eigen::VectorXd b(2);
      b << b0, b1;
      return std::exp(log_posterior(spec, b).value - log_posterior(spec, fit.mode).value);
    };
    auto p_at = [&](double b0, double b1) {
      return inverse_link(spec.link, x[0] * b0 + x[1] * b1);
    };
    const double z = oracles::integrate2(
        [&](double a, double b) { return weight(a, b); }, fit.mode[0] - s0,
        fit.mode[0] + s0, [&](double) { return fit.mode[1] - s1; },
        [&](double) { return fit.mode[1] + s1; }, 1e-9);
    auto expect = [&](auto&& f) {
      return oracles::integrate2(
                 [&](double a, double b) { return f(p_at(a, b)) * weight(a, b); },
                 fit.mode[0] - s0, fit.mode[0] + s0, [&](double) { return fit.mode[1] - s1; },
                 [&](double) { return fit.mode[1] + s1; }, 1e-9) / z;
    };
    const double ep = expect([](double p) { return p; });
    const double ep2 = expect([](double p) { return p * p; });
    const double epq = expect([](double p) { return p * (1.0 - p); });
    or_mean[c] = m * ep;
    or_within[c] = m * epq;
    or_between[c] = m * m * (ep2 - ep * ep);
  }
  const double w0 = post.weights[0], w1 = post.weights[1];
  const double lead_oracle = w0 * or_within[0] + w1 * or_within[1];
  const double mix = w0 * or_mean[0] + w1 * or_mean[1];
  const double var_between_models =
      w0 * (or_mean[0] - mix) * (or_mean[0] - mix) + w1 * (or_mean[1] - mix) * (or_mean[1] - mix);
  const double var_e_oracle = w0 * or_between[0] + w1 * or_between[1] + var_between_models;

  // plan "1,2": condition jointly on (link, beta)
  const auto mc = decompose_mc(fitted, data, post, parse_plan("1,2", 2), {256, 64}, 31);
  REQUIRE(mc.terms.size() == 2);
  CHECK(std::fabs(mc.terms[0].value - lead_oracle) <= 3.0 * mc.terms[0].std_error);
  CHECK(std::fabs(mc.terms[1].value - var_e_oracle) <= 3.0 * mc.terms[1].std_error);
}
