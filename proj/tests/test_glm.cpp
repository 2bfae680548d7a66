#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ppv/conjugate.hpp"
#include "ppv/glm.hpp"
#include "ppv/rng.hpp"

using namespace ppv;

namespace {

Dataset synthetic_binomial(std::uint64_t seed, std::size_t n, int trials,
                           std::vector<double> beta_true) {
  RngStream rng(seed);
  std::map<std::string, std::vector<double>> covariates;
  std::vector<double> ys(n);
  const std::size_t d = beta_true.size() - 1;  // first entry is the intercept
  std::vector<std::vector<double>*> cols;
  for (std::size_t j = 0; j < d; ++j) {
    auto& col = covariates["x" + std::to_string(j + 1)];
    col.resize(n);
    cols.push_back(&col);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double eta = beta_true[0];
    for (std::size_t j = 0; j < d; ++j) {
      const double x = rng.normal();
      (*cols[j])[i] = x;
      eta += beta_true[j + 1] * x;
    }
    const double p = 1.0 / (1.0 + std::exp(-eta));
    ys[i] = static_cast<double>(rng.binomial(trials, p));
  }
  return Dataset(std::move(ys), std::move(covariates));
}

std::vector<std::string> covariate_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

}  // namespace

TEST_CASE("inverse links at eta = 0") {
  CHECK(inverse_link(Link::kLogit, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(inverse_link(Link::kProbit, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(inverse_link(Link::kCloglog, 0.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("inverse links are strictly increasing on a 1e3-point grid") {
  struct Range { Link link; double lo, hi; };
  for (const auto& r : {Range{Link::kLogit, -30.0, 30.0}, Range{Link::kProbit, -7.0, 7.0},
                        Range{Link::kCloglog, -15.0, 3.0}}) {
    double prev = inverse_link(r.link, r.lo);
    for (int i = 1; i < 1000; ++i) {
      const double eta = r.lo + (r.hi - r.lo) * i / 999.0;
      const double p = inverse_link(r.link, eta);
      CHECK(p > prev);
      prev = p;
    }
  }
}

TEST_CASE("inverse links stay inside the clamp") {
  for (Link link : {Link::kLogit, Link::kProbit, Link::kCloglog}) {
    for (double eta : {-1e6, -50.0, 0.0, 50.0, 1e6}) {
      const double p = inverse_link(link, eta);
      CHECK(p >= 1e-15);
      CHECK(p <= 1.0 - 1e-15);
    }
  }
}

TEST_CASE("log posterior at beta = 0 under the logit link is analytic") {
  const int m = 6;
  const auto data = synthetic_binomial(4, 12, m, {0.4, -0.8});
  const auto spec = make_glm_spec(Link::kLogit, {"x1"}, m, 10.0, data);
  const auto lp = log_posterior(spec, Eigen::VectorXd::Zero(2));

  double expected = 0.0;
  for (double y : data.responses()) {
    expected += std::lgamma(m + 1.0) - std::lgamma(y + 1.0) - std::lgamma(m - y + 1.0);
  }
  expected -= static_cast<double>(data.n()) * m * std::log(2.0);
  const double log2pi = std::log(2.0 * 3.14159265358979323846);
  expected += -2.0 * (0.5 * log2pi + std::log(10.0));  // prior at zero
  CHECK(lp.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("analytic gradient and Hessian match central finite differences") {
  // 50 random (spec, beta) pairs per link
  for (Link link : {Link::kLogit, Link::kProbit, Link::kCloglog}) {
    RngStream rng(static_cast<std::uint64_t>(link) * 101 + 7);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t d = 1 + rng.uniform_index(3);  // covariates
      std::vector<double> beta_true(d + 1);
      for (auto& b : beta_true) b = rng.uniform(-0.8, 0.8);
      const auto data = synthetic_binomial(rng.next_u64(), 20 + rng.uniform_index(20), 6,
                                           beta_true);
      const auto spec = make_glm_spec(link, covariate_names(d), 6, 10.0, data);

      Eigen::VectorXd beta(d + 1);
      for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = rng.uniform(-1.0, 1.0);
      const auto lp = log_posterior(spec, beta);

      auto value_at = [&](const std::vector<double>& x) {
        Eigen::VectorXd b(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) b[static_cast<Eigen::Index>(j)] = x[j];
        return log_posterior(spec, b).value;
      };
      std::vector<double> x(beta.data(), beta.data() + beta.size());
      const auto fd_grad = oracles::fd_gradient(value_at, x);
      for (std::size_t j = 0; j <= d; ++j) {
        const double scale = std::max(1.0, std::fabs(fd_grad[j]));
        CHECK(std::fabs(lp.gradient[static_cast<Eigen::Index>(j)] - fd_grad[j]) / scale <
              1e-5);
      }
      // Hessian against central differences of the (validated) gradient
      for (std::size_t j = 0; j <= d; ++j) {
        const double h = 1e-6 * std::max(1.0, std::fabs(beta[static_cast<Eigen::Index>(j)]));
        Eigen::VectorXd up = beta, down = beta;
        up[static_cast<Eigen::Index>(j)] += h;
        down[static_cast<Eigen::Index>(j)] -= h;
        const Eigen::VectorXd col =
            (log_posterior(spec, up).gradient - log_posterior(spec, down).gradient) /
            (2.0 * h);
        for (std::size_t a = 0; a <= d; ++a) {
          const double scale = std::max(1.0, std::fabs(col[static_cast<Eigen::Index>(a)]));
          CHECK(std::fabs(lp.hessian(static_cast<Eigen::Index>(a),
                                     static_cast<Eigen::Index>(j)) -
                          col[static_cast<Eigen::Index>(a)]) / scale < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("rank-deficient designs are rejected at spec construction") {
  // duplicate a covariate so the design cannot have full column rank
  auto data_raw = synthetic_binomial(9, 15, 6, {0.0, 0.5});
  auto covs = data_raw.covariates();
  covs["x2"] = covs.at("x1");
  const Dataset data(data_raw.responses(), covs);
  CHECK_THROWS_AS(make_glm_spec(Link::kLogit, {"x1", "x2"}, 6, 10.0, data),
                  ValidationError);
}

TEST_CASE("laplace log marginal vs quadrature") {
  SUBCASE("intercept-only logit on balanced data: 1e-3 log units") {
    // perfectly balanced counts: the posterior is symmetric about zero, so
    // the skewness term of the Laplace error vanishes
    std::vector<double> ys(96, 3.0);
    const Dataset data(ys, {});
    const auto spec = make_glm_spec(Link::kLogit, {}, 6, 10.0, data);

    auto log_post = [&](double b0) {
      Eigen::VectorXd b(1);
      b << b0;
      return log_posterior(spec, b).value;
    };
    const double peak = log_post(0.0);
    const double quad = std::log(oracles::integrate(
        [&](double b0) { return std::exp(log_post(b0) - peak); }, -4.0, 4.0, 1e-13)) + peak;
    CHECK(std::fabs(laplace_log_marginal(spec) - quad) < 1e-3);
  }

  SUBCASE("two-coefficient model: 5e-3 log units") {
    const auto data = synthetic_binomial(11, 80, 6, {0.2, 0.7});
    const auto spec = make_glm_spec(Link::kLogit, {"x1"}, 6, 10.0, data);
    const auto fit = laplace_fit(spec);

    auto log_post = [&](double b0, double b1) {
      Eigen::VectorXd b(2);
      b << b0, b1;
      return log_posterior(spec, b).value;
    };
    const double peak = log_post(fit.mode[0], fit.mode[1]);
    const double s0 = 8.0 * std::sqrt(fit.neg_hessian.inverse()(0, 0));
    const double s1 = 8.0 * std::sqrt(fit.neg_hessian.inverse()(1, 1));
    const double quad = std::log(oracles::integrate2(
        [&](double b0, double b1) { return std::exp(log_post(b0, b1) - peak); },
        fit.mode[0] - s0, fit.mode[0] + s0,
        [&](double) { return fit.mode[1] - s1; },
        [&](double) { return fit.mode[1] + s1; }, 1e-10)) + peak;
    CHECK(std::fabs(fit.log_marginal - quad) < 5e-3);
  }

  SUBCASE("tight prior limit: log marginal approaches the likelihood at zero") {
    std::vector<double> ys = {3, 2, 4, 3, 3, 2};
    const Dataset data(ys, {});
    const auto spec = make_glm_spec(Link::kLogit, {}, 6, 1e-3, data);
    // at sd -> 0 the prior integrates out to a point mass at beta = 0
    double loglik_at_zero = 0.0;
    for (double y : ys) {
      loglik_at_zero += std::lgamma(7.0) - std::lgamma(y + 1.0) - std::lgamma(7.0 - y) -
                        6.0 * std::log(2.0);
    }
    CHECK(std::fabs(laplace_log_marginal(spec) - loglik_at_zero) < 1e-2);
  }
}

TEST_CASE("random walk metropolis") {
  SUBCASE("intercept-only posterior mean matches a grid computation") {
    std::vector<double> ys = {1, 0, 2, 1, 1, 0, 1, 2, 0, 1, 3, 1};
    const Dataset data(ys, {});
    const auto spec = make_glm_spec(Link::kLogit, {}, 6, 10.0, data);

    auto log_post = [&](double b0) {
      Eigen::VectorXd b(1);
      b << b0;
      return log_posterior(spec, b).value;
    };
    const double peak = log_post(-1.4);
    const double z = oracles::integrate(
        [&](double b) { return std::exp(log_post(b) - peak); }, -6.0, 3.0, 1e-13);
    const double grid_mean = oracles::integrate(
        [&](double b) { return b * std::exp(log_post(b) - peak); }, -6.0, 3.0, 1e-13) / z;

    const auto draws = rw_metropolis(spec, 40000, 5000, 0.0, 123);
    std::vector<double> b0s;
    for (const auto& d : draws.draws) b0s.push_back(d[0]);
    const double mc_mean = pairwise_mean(b0s);
    // MC-SE inflated for autocorrelation (acceptance ~0.4, effective n ~ n/10)
    const double se = std::sqrt(sample_variance(b0s) / (b0s.size() / 10.0));
    CHECK(std::fabs(mc_mean - grid_mean) < 3.0 * se);
    CHECK(draws.acceptance_rate > 0.05);
    CHECK(draws.acceptance_rate < 0.95);
    CHECK(draws.warning.empty());
    CHECK(draws.draws.size() == 40000);
  }

  SUBCASE("exactly symmetric data: slope posterior mean is zero") {
    // rows come in (x, y), (-x, y) pairs, so the likelihood is even in the
    // slope and the posterior slope mean is exactly zero
    std::vector<double> xs, ys;
    RngStream rng(21);
    for (int i = 0; i < 20; ++i) {
      const double x = rng.uniform(0.2, 2.0);
      const double y = static_cast<double>(rng.uniform_index(7));
      xs.push_back(x);
      ys.push_back(y);
      xs.push_back(-x);
      ys.push_back(y);
    }
    const Dataset data(ys, {{"x1", xs}});
    const auto spec = make_glm_spec(Link::kLogit, {"x1"}, 6, 10.0, data);
    const auto draws = rw_metropolis(spec, 30000, 5000, 0.0, 5);
    std::vector<double> slopes;
    for (const auto& d : draws.draws) slopes.push_back(d[1]);
    const double se = std::sqrt(sample_variance(slopes) / (slopes.size() / 10.0));
    CHECK(std::fabs(pairwise_mean(slopes)) < 3.0 * se);
  }

  SUBCASE("two chains with different seeds agree") {
    const auto data = synthetic_binomial(33, 40, 6, {0.3, -0.5});
    const auto spec = make_glm_spec(Link::kLogit, {"x1"}, 6, 10.0, data);
    const auto a = rw_metropolis(spec, 30000, 4000, 0.0, 1001);
    const auto b = rw_metropolis(spec, 30000, 4000, 0.0, 2002);
    for (int j = 0; j < 2; ++j) {
      std::vector<double> xa, xb;
      for (const auto& d : a.draws) xa.push_back(d[j]);
      for (const auto& d : b.draws) xb.push_back(d[j]);
      const double se = std::sqrt(sample_variance(xa) / (xa.size() / 10.0) +
                                  sample_variance(xb) / (xb.size() / 10.0));
      CHECK(std::fabs(pairwise_mean(xa) - pairwise_mean(xb)) < 4.0 * se);
    }
  }

  SUBCASE("extreme step scale attaches a warning instead of failing") {
    const auto data = synthetic_binomial(33, 20, 6, {0.3, -0.5});
    const auto spec = make_glm_spec(Link::kLogit, {"x1"}, 6, 10.0, data);
    const auto draws = rw_metropolis(spec, 2000, 200, 80.0, 3);
    CHECK(draws.acceptance_rate < 0.05);
    CHECK_FALSE(draws.warning.empty());
    CHECK(draws.draws.size() == 2000);
  }

  SUBCASE("deterministic given the seed") {
    const auto data = synthetic_binomial(33, 20, 6, {0.3, -0.5});
    const auto spec = make_glm_spec(Link::kLogit, {"x1"}, 6, 10.0, data);
    const auto a = rw_metropolis(spec, 500, 100, 0.0, 42);
    const auto b = rw_metropolis(spec, 500, 100, 0.0, 42);
    REQUIRE(a.draws.size() == b.draws.size());
    for (std::size_t i = 0; i < a.draws.size(); ++i)
      CHECK(a.draws[i] == b.draws[i]);
  }
}

TEST_CASE("predictive moments at a new covariate vector") {
  const auto data = synthetic_binomial(55, 30, 6, {0.1, 0.6});
  const auto spec = make_glm_spec(Link::kLogit, {"x1"}, 6, 10.0, data);

  SUBCASE("degenerate draws: probability variance is zero") {
    PosteriorDraws draws;
    Eigen::VectorXd b(2);
    b << 0.3, -0.2;
    for (int i = 0; i < 50; ++i) draws.draws.push_back(b);
    const auto m = predictive_moments_at(spec, draws, {{"x1", 0.7}}, GlmTarget::kProbability);
    CHECK(m.variance == doctest::Approx(0.0));
  }

  SUBCASE("count target with point-mass draws and m=1 is Bernoulli") {
    const auto spec1 = make_glm_spec(Link::kLogit, {"x1"}, 1,
                                     10.0, synthetic_binomial(56, 30, 1, {0.1, 0.6}));
    PosteriorDraws draws;
    Eigen::VectorXd b(2);
    b << 0.4, 0.1;
    for (int i = 0; i < 50; ++i) draws.draws.push_back(b);
    const auto m = predictive_moments_at(spec1, draws, {{"x1", -0.3}}, GlmTarget::kCount);
    CHECK(m.variance == doctest::Approx(m.mean * (1.0 - m.mean)).epsilon(1e-12));
  }

  SUBCASE("missing covariate is a named-field error") {
    PosteriorDraws draws;
    draws.draws.push_back(Eigen::VectorXd::Zero(2));
    CHECK_THROWS_WITH_AS(
        predictive_moments_at(spec, draws, {{"wrong", 1.0}}, GlmTarget::kCount),
        doctest::Contains("x1"), ValidationError);
  }

  SUBCASE("count variance splits into within plus spread, identity to 1e-12") {
    const auto draws = rw_metropolis(spec, 2000, 500, 0.0, 9);
    const std::map<std::string, double> x_new = {{"x1", 0.4}};
    const auto m = predictive_moments_at(spec, draws, x_new, GlmTarget::kCount);
    const Eigen::VectorXd x = design_row_at(spec, x_new);
    std::vector<double> means, within;
    for (const auto& d : draws.draws) {
      const double p = inverse_link(spec.link, x.dot(d));
      means.push_back(6.0 * p);
      within.push_back(6.0 * p * (1.0 - p));
    }
    const double expected = pairwise_mean(within) + sample_variance(means);
    CHECK(m.variance == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("beta-distributed probability draws reproduce the beta-binomial closed form") {
  // draws of p from Beta(a, b) pushed through the count target must agree
  // with the conjugate closed form (within Monte Carlo error of the moments)
  const double a = 2.0, b = 3.0;
  const int m = 30;
  RngStream rng(333);
  std::vector<double> mean_draws, var_draws;
  const std::size_t n_draws = 2000000;
  std::vector<double> ps(n_draws);
  for (auto& p : ps) {
    const double x = rng.gamma(a, 1.0);
    const double y = rng.gamma(b, 1.0);
    p = x / (x + y);
  }
  for (double p : ps) {
    mean_draws.push_back(m * p);
    var_draws.push_back(m * p * (1.0 - p));
  }
  const double within = pairwise_mean(var_draws);
  const double between = sample_variance(mean_draws);
  const auto split = beta_binomial_decomposition({m, a, b});
  CHECK(within == doctest::Approx(split.e_var).epsilon(2e-3));
  CHECK(between == doctest::Approx(split.var_e).epsilon(5e-3));
}
