// Binomial GLM backend: logit / cloglog / probit links over covariate-subset
// models, with analytic log-posterior derivatives, Laplace marginal
// likelihoods, random-walk Metropolis sampling, and predictive moments for a
// new covariate vector (for the count or for the success probability).

#ifndef PPV_GLM_HPP
#define PPV_GLM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppv/backend.hpp"
#include "ppv/model.hpp"

namespace ppv {

enum class Link { kLogit, kCloglog, kProbit };

Link link_from_label(const std::string& label);
std::string link_name(Link link);

/// Inverse link, clamped into [1e-15, 1 - 1e-15] for log-likelihood
/// stability.  Strictly increasing in eta before clamping.
double inverse_link(Link link, double eta);
/// dp/deta of the inverse link.
double inverse_link_deriv(Link link, double eta);

/// How a design column is built from the raw data; kept so a new covariate
/// vector can be pushed through the same transform.
struct ColumnTransform {
  std::string name;                      // column name ("t", "t2", ...)
  std::optional<std::string> square_of;  // derived column: (source - source_center)^2
  double source_center = 0.0;
  double center = 0.0;                   // standardization of the built column
  double scale = 1.0;
};

/// One binomial GLM: link + covariate subset + trials + coefficient prior.
/// The design matrix is intercept plus the standardized subset columns
/// (centered/scaled by training statistics; squared terms square the centered
/// source first).  Construction fails if the design is rank deficient.
struct GlmModelSpec {
  Link link = Link::kLogit;
  int trials = 1;
  double prior_sd = 10.0;  // independent Normal(0, prior_sd) per coefficient

  Eigen::MatrixXd design;    // n x d, first column constant 1
  Eigen::VectorXd response;  // counts in [0, trials]
  double log_choose_sum = 0.0;  // sum_i log C(trials, y_i), constant in beta
  std::vector<ColumnTransform> transforms;  // one per non-intercept column

  std::size_t coefficient_count() const { return static_cast<std::size_t>(design.cols()); }
};

/// Derived-column definitions: name -> source covariate to center and square.
using DerivedSquares = std::map<std::string, std::string>;

GlmModelSpec make_glm_spec(Link link, const std::vector<std::string>& covariate_subset,
                           int trials, double prior_sd, const Dataset& data,
                           const DerivedSquares& derived = {});

/// Standardized design row for a new observation; throws ValidationError
/// naming any covariate missing from x_new.
Eigen::VectorXd design_row_at(const GlmModelSpec& spec,
                              const std::map<std::string, double>& x_new);

struct LogPosterior {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Binomial log-likelihood under the link plus the Normal log-prior, with
/// analytic gradient and Hessian.
LogPosterior log_posterior(const GlmModelSpec& spec, const Eigen::VectorXd& beta);

/// Value only; what the sampler evaluates per proposal.
double log_posterior_value(const GlmModelSpec& spec, const Eigen::VectorXd& beta);

struct LaplaceFit {
  Eigen::VectorXd mode;
  Eigen::MatrixXd neg_hessian;  // -H at the mode, positive definite
  double log_marginal = 0.0;
};

/// Newton from zero with step halving; converges when the gradient sup-norm
/// drops below 1e-8 (at most 100 steps).  Throws ConvergenceError with the
/// final gradient norm, or reports a saddle when -H is not positive definite.
LaplaceFit laplace_fit(const GlmModelSpec& spec);

double laplace_log_marginal(const GlmModelSpec& spec);

struct PosteriorDraws {
  std::vector<Eigen::VectorXd> draws;  // post-burn-in
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  std::string warning;  // set when the acceptance rate leaves [0.05, 0.95]
};

/// Gaussian-proposal random walk started at the Laplace mode, with proposal
/// covariance step_scale^2 (-H)^-1.  step_scale <= 0 selects 2.38/sqrt(d).
/// Deterministic given the seed.
PosteriorDraws rw_metropolis(const GlmModelSpec& spec, std::size_t chain_length,
                             std::size_t burn_in, double step_scale, std::uint64_t seed);

enum class GlmTarget { kProbability, kCount };

/// Moments of the target at x_new over the posterior draws.  For the count,
/// the variance is the within-draw binomial part plus the across-draw mean
/// spread (sample variances use the n-1 divisor).
PredictiveMoments predictive_moments_at(const GlmModelSpec& spec, const PosteriorDraws& draws,
                                        const std::map<std::string, double>& x_new,
                                        GlmTarget target);

// ---------------------------------------------------------------------------
// Grid backend: factors select the link and/or the covariate subset.

struct GlmGridConfig {
  std::optional<std::size_t> link_factor;    // factor whose levels are L/C/P
  Link fixed_link = Link::kLogit;            // used when link_factor is absent
  std::optional<std::size_t> subset_factor;  // factor whose levels are "t+s" style subsets
  std::vector<std::string> fixed_covariates;
  int trials = 1;
  double prior_sd = 10.0;
  DerivedSquares derived;
  GlmTarget target = GlmTarget::kCount;
  std::map<std::string, double> x_new;
  std::size_t chain_length = 20000;
  std::size_t burn_in = 5000;
  double step_scale = 0.0;  // auto
  std::uint64_t seed = 1;   // per-cell chains derive from this
};

/// Split a subset level label: covariate names joined by '+', or "none" for
/// the intercept-only model.
std::vector<std::string> parse_subset_label(const std::string& label);

class GlmBackend final : public Backend {
 public:
  GlmBackend(std::vector<FactorSpec> factors, GlmGridConfig config);

  std::size_t cell_count() const override { return grid_.size(); }
  bool has_parameter() const override { return true; }
  bool closed_form() const override { return false; }
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t, const Dataset&, RngStream&) const override;
  double sample_conditional_var(std::size_t, const Dataset&, RngStream&) const override;
  std::string family() const override { return "glm-binomial"; }

  const GlmGridConfig& config() const { return config_; }
  GlmModelSpec spec_for_cell(std::size_t cell, const Dataset& data) const;

  struct CellFit {
    ComponentSummary summary;
    std::vector<double> mean_draws;  // E(target | beta_t) per draw
    std::vector<double> var_draws;   // Var(target | beta_t) per draw
  };
  CellFit fit_cell_full(std::size_t cell, const Dataset& data) const;

 private:
  std::vector<FactorSpec> factors_;
  FactorGrid grid_;
  GlmGridConfig config_;
};

/// Backend of frozen component summaries, optionally with stored conditional
/// mean/variance draws resampled by the Monte Carlo hooks.
class PrecomputedBackend final : public Backend {
 public:
  PrecomputedBackend(std::vector<ComponentSummary> summaries,
                     std::vector<std::vector<double>> mean_draws,
                     std::vector<std::vector<double>> var_draws, bool has_parameter,
                     std::size_t fitted_n, std::string family);

  std::size_t cell_count() const override { return summaries_.size(); }
  bool has_parameter() const override { return has_parameter_; }
  bool closed_form() const override { return mean_draws_.empty(); }
  ComponentSummary fit(std::size_t cell, const Dataset& data) const override;
  double sample_conditional_mean(std::size_t, const Dataset&, RngStream&) const override;
  double sample_conditional_var(std::size_t, const Dataset&, RngStream&) const override;
  std::string family() const override { return family_; }

 private:
  std::vector<ComponentSummary> summaries_;
  std::vector<std::vector<double>> mean_draws_;  // empty => closed-form summaries
  std::vector<std::vector<double>> var_draws_;
  bool has_parameter_ = false;
  std::size_t fitted_n_ = 0;
  std::string family_;
};

/// Fit every cell of an expensive backend once (in parallel) and return the
/// same model over a PrecomputedBackend.  Models whose backend is already
/// cheap are returned unchanged.
HierarchicalModel materialize(const HierarchicalModel& model, const Dataset& data);

}  // namespace ppv

#endif  // PPV_GLM_HPP
