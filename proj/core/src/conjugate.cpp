#include "ppv/conjugate.hpp"

#include <cmath>

namespace ppv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Normal - Normal (known variance)

void NormalKnownVarSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ValidationError("normal-known-var: sigma must be finite and > 0");
  if (!(tau0 > 0.0) || !std::isfinite(tau0))
    throw ValidationError("normal-known-var: tau0 must be finite and > 0");
  if (!std::isfinite(theta0))
    throw ValidationError("normal-known-var: theta0 must be finite");
}

NnPosterior nn_posterior_params(const NormalKnownVarSpec& spec, const Dataset& data) {
  spec.validate();
  const double n = static_cast<double>(data.n());
  const double prec = n / (spec.sigma * spec.sigma) + 1.0 / (spec.tau0 * spec.tau0);
  const double tau_n2 = 1.0 / prec;
  const double ybar = mean_of(data.responses());
  const double theta_n =
      tau_n2 * (n * ybar / (spec.sigma * spec.sigma) + spec.theta0 / (spec.tau0 * spec.tau0));
  return {theta_n, tau_n2};
}

NnSplit nn_decomposition(const NormalKnownVarSpec& spec, const Dataset& data) {
  const auto post = nn_posterior_params(spec, data);
  return {spec.sigma * spec.sigma, post.tau_n2};
}

double nn_log_marginal(const NormalKnownVarSpec& spec, const Dataset& data) {
  // y^n ~ N(theta0 1, sigma^2 I + tau0^2 J); Sherman-Morrison gives the
  // determinant and quadratic form without forming the matrix.
  spec.validate();
  const std::size_t n = data.n();
  if (n == 0) return 0.0;
  const double s2 = spec.sigma * spec.sigma;
  const double t2 = spec.tau0 * spec.tau0;
  double ss = 0.0, sum = 0.0;
  for (double y : data.responses()) {
    const double d = y - spec.theta0;
    ss += d * d;
    sum += d;
  }
  const double denom = s2 + static_cast<double>(n) * t2;
  const double log_det = static_cast<double>(n - 1) * std::log(s2) + std::log(denom);
  const double quad = (ss - t2 * sum * sum / denom) / s2;
  return -0.5 * (static_cast<double>(n) * kLog2Pi + log_det + quad);
}

// ---------------------------------------------------------------------------
// Normal - InvGamma (mu | sigma^2 ~ N(0, sigma^2), sigma^2 ~ IG(alpha, beta))

void NormalInvGammaSpec::validate() const {
  if (!(alpha > 2.0) || !std::isfinite(alpha))
    throw ValidationError("normal-invgamma: alpha must be finite and > 2 "
                          "(finite predictive variance)");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw ValidationError("normal-invgamma: beta must be finite and > 0");
}

NigPosterior nig_posterior_params(const NormalInvGammaSpec& spec, const Dataset& data) {
  spec.validate();
  // prior kappa0 = 1, m0 = 0 by construction of the family
  const double n = static_cast<double>(data.n());
  const double ybar = mean_of(data.responses());
  NigPosterior post;
  post.kappa_n = 1.0 + n;
  post.m_n = n * ybar / post.kappa_n;
  post.alpha_n = spec.alpha + 0.5 * n;
  double ss = 0.0;
  for (double y : data.responses()) ss += (y - ybar) * (y - ybar);
  post.beta_n = spec.beta + 0.5 * ss + n * ybar * ybar / (2.0 * post.kappa_n);
  return post;
}

PredictiveMoments nig_predictive_moments(const NormalInvGammaSpec& spec, const Dataset& data) {
  const auto post = nig_posterior_params(spec, data);
  // alpha > 2 keeps alpha_n > 2, so the t predictive has a finite variance
  if (!(post.alpha_n > 1.0))
    throw ValidationError("normal-invgamma: posterior shape too small for a mean");
  const double var =
      post.beta_n * (post.kappa_n + 1.0) / (post.kappa_n * (post.alpha_n - 1.0));
  return {post.m_n, var};
}

double nig_log_marginal(const NormalInvGammaSpec& spec, const Dataset& data) {
  const auto post = nig_posterior_params(spec, data);
  const double n = static_cast<double>(data.n());
  if (data.n() == 0) return 0.0;
  // kappa0 = 1, so the prior/posterior precision ratio is 1/kappa_n
  return -0.5 * n * kLog2Pi - 0.5 * std::log(post.kappa_n) +
         std::lgamma(post.alpha_n) - std::lgamma(spec.alpha) +
         spec.alpha * std::log(spec.beta) - post.alpha_n * std::log(post.beta_n);
}

// ---------------------------------------------------------------------------
// Beta-Binomial

void BetaBinomialSpec::validate() const {
  if (trials < 1) throw ValidationError("beta-binomial: trials must be >= 1");
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw ValidationError("beta-binomial: a and b must be finite and > 0");
}

BetaBinomialSplit beta_binomial_decomposition(const BetaBinomialSpec& spec) {
  spec.validate();
  const double m = static_cast<double>(spec.trials);
  const double s = spec.a + spec.b;
  const double ab = spec.a * spec.b;
  BetaBinomialSplit split;
  split.e_var = m * ab / (s * (s + 1.0));
  split.var_e = m * m * ab / (s * s * (s + 1.0));
  split.var_e_dominates = split.var_e > split.e_var;
  return split;
}

double beta_binomial_marginal_variance(const BetaBinomialSpec& spec) {
  spec.validate();
  const double m = static_cast<double>(spec.trials);
  const double pbar = spec.a / (spec.a + spec.b);
  return m * pbar * (1.0 - pbar) * (1.0 + (m - 1.0) / (spec.a + spec.b + 1.0));
}

double beta_binomial_log_marginal(const BetaBinomialSpec& spec, const Dataset& data) {
  spec.validate();
  double successes = 0.0, failures = 0.0, log_comb = 0.0;
  for (double y : data.responses()) {
    const int yi = static_cast<int>(y);
    if (yi < 0 || yi > spec.trials || static_cast<double>(yi) != y)
      throw BackendError("beta-binomial: response " + std::to_string(y) +
                         " is not a count in [0, " + std::to_string(spec.trials) + "]");
    successes += y;
    failures += static_cast<double>(spec.trials) - y;
    log_comb += log_choose(spec.trials, yi);
  }
  const auto log_beta = [](double x, double y) {
    return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
  };
  return log_comb + log_beta(spec.a + successes, spec.b + failures) -
         log_beta(spec.a, spec.b);
}

// ---------------------------------------------------------------------------
// Backends

NormalKnownVarBackend::NormalKnownVarBackend(std::vector<NormalKnownVarSpec> cells)
    : cells_(std::move(cells)) {
  for (const auto& c : cells_) c.validate();
}

ComponentSummary NormalKnownVarBackend::fit(std::size_t cell, const Dataset& data) const {
  const auto& spec = cells_.at(cell);
  const auto post = nn_posterior_params(spec, data);
  ComponentSummary s;
  s.log_marginal = nn_log_marginal(spec, data);
  s.mean = post.theta_n;
  s.within_var = spec.sigma * spec.sigma;
  s.between_var = post.tau_n2;
  return s;
}

double NormalKnownVarBackend::sample_conditional_mean(std::size_t cell, const Dataset& data,
                                                      RngStream& rng) const {
  const auto post = nn_posterior_params(cells_.at(cell), data);
  return rng.normal(post.theta_n, std::sqrt(post.tau_n2));
}

double NormalKnownVarBackend::sample_conditional_var(std::size_t cell, const Dataset& data,
                                                     RngStream& rng) const {
  (void)data;
  (void)rng;
  const double sigma = cells_.at(cell).sigma;
  return sigma * sigma;
}

NormalInvGammaBackend::NormalInvGammaBackend(std::vector<NormalInvGammaSpec> cells)
    : cells_(std::move(cells)) {
  for (const auto& c : cells_) c.validate();
}

ComponentSummary NormalInvGammaBackend::fit(std::size_t cell, const Dataset& data) const {
  const auto& spec = cells_.at(cell);
  const auto post = nig_posterior_params(spec, data);
  ComponentSummary s;
  s.log_marginal = nig_log_marginal(spec, data);
  s.mean = post.m_n;
  s.within_var = post.beta_n / (post.alpha_n - 1.0);             // E[sigma^2 | D]
  s.between_var = post.beta_n / (post.kappa_n * (post.alpha_n - 1.0));  // Var(mu | D)
  return s;
}

double NormalInvGammaBackend::sample_conditional_mean(std::size_t cell, const Dataset& data,
                                                      RngStream& rng) const {
  const auto post = nig_posterior_params(cells_.at(cell), data);
  const double sigma2 = rng.inverse_gamma(post.alpha_n, post.beta_n);
  return rng.normal(post.m_n, std::sqrt(sigma2 / post.kappa_n));
}

double NormalInvGammaBackend::sample_conditional_var(std::size_t cell, const Dataset& data,
                                                     RngStream& rng) const {
  const auto post = nig_posterior_params(cells_.at(cell), data);
  return rng.inverse_gamma(post.alpha_n, post.beta_n);
}

BetaBinomialBackend::BetaBinomialBackend(std::vector<BetaBinomialSpec> cells)
    : cells_(std::move(cells)) {
  for (const auto& c : cells_) c.validate();
}

BetaBinomialSpec BetaBinomialBackend::posterior_spec(std::size_t cell,
                                                     const Dataset& data) const {
  BetaBinomialSpec post = cells_.at(cell);
  for (double y : data.responses()) {
    post.a += y;
    post.b += static_cast<double>(post.trials) - y;
  }
  return post;
}

ComponentSummary BetaBinomialBackend::fit(std::size_t cell, const Dataset& data) const {
  const auto& prior = cells_.at(cell);
  const auto post = posterior_spec(cell, data);
  const auto split = beta_binomial_decomposition(post);
  ComponentSummary s;
  s.log_marginal = beta_binomial_log_marginal(prior, data);
  s.mean = static_cast<double>(post.trials) * post.a / (post.a + post.b);
  s.within_var = split.e_var;
  s.between_var = split.var_e;
  return s;
}

double BetaBinomialBackend::sample_conditional_mean(std::size_t cell, const Dataset& data,
                                                    RngStream& rng) const {
  const auto post = posterior_spec(cell, data);
  const double x = rng.gamma(post.a, 1.0);
  const double y = rng.gamma(post.b, 1.0);
  return static_cast<double>(post.trials) * x / (x + y);
}

double BetaBinomialBackend::sample_conditional_var(std::size_t cell, const Dataset& data,
                                                   RngStream& rng) const {
  const auto post = posterior_spec(cell, data);
  const double x = rng.gamma(post.a, 1.0);
  const double y = rng.gamma(post.b, 1.0);
  const double p = x / (x + y);
  return static_cast<double>(post.trials) * p * (1.0 - p);
}

BernoulliFixedBackend::BernoulliFixedBackend(std::vector<double> probabilities)
    : probs_(std::move(probabilities)) {
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("bernoulli-fixed: probabilities must lie in [0, 1]");
  }
}

ComponentSummary BernoulliFixedBackend::fit(std::size_t cell, const Dataset& data) const {
  const double p = probs_.at(cell);
  double log_m = 0.0;
  for (double y : data.responses()) {
    if (y != 0.0 && y != 1.0)
      throw BackendError("bernoulli-fixed: response " + std::to_string(y) +
                         " is not 0/1");
    log_m += y == 1.0 ? std::log(p) : std::log1p(-p);
  }
  ComponentSummary s;
  s.log_marginal = log_m;
  s.mean = p;
  s.within_var = p * (1.0 - p);
  s.between_var = 0.0;
  return s;
}

double BernoulliFixedBackend::sample_conditional_mean(std::size_t cell, const Dataset&,
                                                      RngStream&) const {
  return probs_.at(cell);
}

double BernoulliFixedBackend::sample_conditional_var(std::size_t cell, const Dataset&,
                                                     RngStream&) const {
  const double p = probs_.at(cell);
  return p * (1.0 - p);
}

CompositeBackend::CompositeBackend(std::vector<BackendPtr> parts) : parts_(std::move(parts)) {
  for (const auto& p : parts_) {
    if (!p || p->cell_count() != 1)
      throw ValidationError("composite backend: every part must be a single component");
  }
}

bool CompositeBackend::has_parameter() const {
  for (const auto& p : parts_)
    if (!p->has_parameter()) return false;
  return !parts_.empty();
}

bool CompositeBackend::closed_form() const {
  for (const auto& p : parts_)
    if (!p->closed_form()) return false;
  return true;
}

ComponentSummary CompositeBackend::fit(std::size_t cell, const Dataset& data) const {
  return parts_.at(cell)->fit(0, data);
}

double CompositeBackend::sample_conditional_mean(std::size_t cell, const Dataset& data,
                                                 RngStream& rng) const {
  return parts_.at(cell)->sample_conditional_mean(0, data, rng);
}

double CompositeBackend::sample_conditional_var(std::size_t cell, const Dataset& data,
                                                RngStream& rng) const {
  return parts_.at(cell)->sample_conditional_var(0, data, rng);
}

}  // namespace ppv
