// Closed-form component families: Normal likelihood with Normal mean prior
// (known variance), Normal with Normal-InvGamma priors, Beta-Binomial, and
// the fixed-probability Bernoulli used by the toy models.  Each family
// supplies marginal likelihoods, predictive moments split into within- and
// between-parameter parts, and posterior sampling hooks.

#ifndef PPV_CONJUGATE_HPP
#define PPV_CONJUGATE_HPP

#include <vector>

#include "ppv/backend.hpp"

namespace ppv {

// ---------------------------------------------------------------------------
// Normal likelihood, Normal prior on the mean, known sigma.

struct NormalKnownVarSpec {
  double sigma = 1.0;   // likelihood standard deviation, > 0
  double theta0 = 0.0;  // prior mean
  double tau0 = 1.0;    // prior standard deviation, > 0

  void validate() const;
};

struct NnPosterior {
  double theta_n = 0.0;  // posterior mean of theta
  double tau_n2 = 0.0;   // posterior variance of theta: (n/sigma^2 + 1/tau0^2)^-1
};

/// Precision-weighted posterior update; n = 0 recovers the prior.
NnPosterior nn_posterior_params(const NormalKnownVarSpec& spec, const Dataset& data);

struct NnSplit {
  double e_var = 0.0;  // E_theta Var(Y | theta, D) = sigma^2
  double var_e = 0.0;  // Var_theta E(Y | theta, D) = tau_n^2
};

/// The two-term split of the posterior predictive variance sigma^2 + tau_n^2.
NnSplit nn_decomposition(const NormalKnownVarSpec& spec, const Dataset& data);

double nn_log_marginal(const NormalKnownVarSpec& spec, const Dataset& data);

// ---------------------------------------------------------------------------
// Normal likelihood with mu ~ N(0, sigma^2), sigma^2 ~ InvGamma(alpha, beta).

struct NormalInvGammaSpec {
  double alpha = 3.0;  // shape, > 2 so the predictive variance is finite
  double beta = 1.0;   // scale, > 0

  void validate() const;
};

struct NigPosterior {
  double kappa_n = 1.0;
  double m_n = 0.0;
  double alpha_n = 0.0;
  double beta_n = 0.0;
};

NigPosterior nig_posterior_params(const NormalInvGammaSpec& spec, const Dataset& data);

/// Student-t posterior predictive mean and variance.
PredictiveMoments nig_predictive_moments(const NormalInvGammaSpec& spec, const Dataset& data);

double nig_log_marginal(const NormalInvGammaSpec& spec, const Dataset& data);

// ---------------------------------------------------------------------------
// Beta-Binomial: counts out of m trials, p ~ Beta(a, b).

struct BetaBinomialSpec {
  int trials = 1;   // m >= 1
  double a = 1.0;   // Beta shape, > 0
  double b = 1.0;   // Beta shape, > 0

  void validate() const;
};

struct BetaBinomialSplit {
  double e_var = 0.0;  // m E[p(1-p)]
  double var_e = 0.0;  // m^2 Var(p)
  bool var_e_dominates = false;
};

/// Split of the (prior or posterior) predictive variance of the next count
/// under the spec's Beta parameters.  Pass posterior parameters for the
/// posterior form.
BetaBinomialSplit beta_binomial_decomposition(const BetaBinomialSpec& spec);

/// Marginal Beta-Binomial variance m p(1-p) (1 + (m-1)/(a+b+1)), p = a/(a+b).
double beta_binomial_marginal_variance(const BetaBinomialSpec& spec);

double beta_binomial_log_marginal(const BetaBinomialSpec& spec, const Dataset& data);

// ---------------------------------------------------------------------------
// Backends over grids of component specs (one spec per full assignment).

class NormalKnownVarBackend final : public Backend {
 public:
  explicit NormalKnownVarBackend(std::vector<NormalKnownVarSpec> cells);
  std::size_t cell_count() const override { return cells_.size(); }
  bool has_parameter() const override { return true; }
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t cell, const Dataset& data,
                                 RngStream& rng) const override;
  double sample_conditional_var(std::size_t cell, const Dataset& data,
                                RngStream& rng) const override;
  std::string family() const override { return "normal-known-var"; }

 private:
  std::vector<NormalKnownVarSpec> cells_;
};

class NormalInvGammaBackend final : public Backend {
 public:
  explicit NormalInvGammaBackend(std::vector<NormalInvGammaSpec> cells);
  std::size_t cell_count() const override { return cells_.size(); }
  bool has_parameter() const override { return true; }
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t cell, const Dataset& data,
                                 RngStream& rng) const override;
  double sample_conditional_var(std::size_t cell, const Dataset& data,
                                RngStream& rng) const override;
  std::string family() const override { return "normal-invgamma"; }

 private:
  std::vector<NormalInvGammaSpec> cells_;
};

class BetaBinomialBackend final : public Backend {
 public:
  explicit BetaBinomialBackend(std::vector<BetaBinomialSpec> cells);
  std::size_t cell_count() const override { return cells_.size(); }
  bool has_parameter() const override { return true; }
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t cell, const Dataset& data,
                                 RngStream& rng) const override;
  double sample_conditional_var(std::size_t cell, const Dataset& data,
                                RngStream& rng) const override;
  std::string family() const override { return "beta-binomial"; }

 private:
  BetaBinomialSpec posterior_spec(std::size_t cell, const Dataset& data) const;
  std::vector<BetaBinomialSpec> cells_;
};

/// Bernoulli with a fixed success probability per assignment; no integrated
/// parameter, so the between-parameter variance is identically zero.
class BernoulliFixedBackend final : public Backend {
 public:
  explicit BernoulliFixedBackend(std::vector<double> probabilities);
  std::size_t cell_count() const override { return probs_.size(); }
  bool has_parameter() const override { return false; }
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t cell, const Dataset& data,
                                 RngStream& rng) const override;
  double sample_conditional_var(std::size_t cell, const Dataset& data,
                                RngStream& rng) const override;
  std::string family() const override { return "bernoulli-fixed"; }

 private:
  std::vector<double> probs_;
};

/// Dispatches each grid cell to its own single-cell backend; lets a model mix
/// component families.
class CompositeBackend final : public Backend {
 public:
  explicit CompositeBackend(std::vector<BackendPtr> parts);
  std::size_t cell_count() const override { return parts_.size(); }
  bool has_parameter() const override;
  bool closed_form() const override;
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t cell, const Dataset& data,
                                 RngStream& rng) const override;
  double sample_conditional_var(std::size_t cell, const Dataset& data,
                                RngStream& rng) const override;
  std::string family() const override { return "composite"; }

 private:
  std::vector<BackendPtr> parts_;  // each with cell_count() == 1
};

}  // namespace ppv

#endif  // PPV_CONJUGATE_HPP
