// Bundled end-to-end analyses: the Challenger O-ring three-term
// decomposition over 24 binomial GLMs, the BMA two-/three-term equivalence
// check, variable-set importance, and the simulated binomial sample-size
// sweep.

#ifndef PPV_EXPERIMENTS_HPP
#define PPV_EXPERIMENTS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ppv/decompose.hpp"
#include "ppv/glm.hpp"

namespace ppv {

// ---------------------------------------------------------------------------
// Challenger

/// The 23-flight O-ring record: damaged count (out of 6), launch temperature
/// (deg F), leak-check pressure (psi).
Dataset challenger_dataset();

/// The bundled CSV rendering of the same record (columns damaged,t,s).
std::string challenger_csv_text();

struct ChallengerConfig {
  double t_new = 31.0;     // prediction temperature
  double s_new = 200.0;    // leak-check pressure at prediction
  double prior_sd = 1.5;   // Normal prior sd on standardized coefficients
  std::size_t chain_length = 20000;
  std::size_t burn_in = 5000;
  std::uint64_t seed = 1729;
  bool restricted = false;  // zero prior outside the six models m1,m4,m5,m7,m8,m15
};

/// The 3 links x 8 subsets model grid targeting the failure probability at
/// (t_new, s_new).  `restricted` reproduces the six-model prior restriction.
HierarchicalModel challenger_model(const ChallengerConfig& config);

struct ModelTableRow {
  std::size_t index = 0;  // 1-based, Table-1 order
  std::string link;
  std::string subset;
  double log_marginal = 0.0;
  double weight = 0.0;
  double mean = 0.0;      // E(p | model, D)
  double variance = 0.0;  // Var(p | model, D)
};

struct ChallengerReport {
  DecompositionResult three_term;             // plan link|subset over 24 models
  DecompositionResult restricted_two_term;    // Draper's 6-model condensed split
  std::vector<ModelTableRow> model_table;     // 24 rows
  std::vector<std::pair<std::string, double>> subset_importance;  // 8 rows
  DropTermReport drop_report;                 // threshold 0.05
};

ChallengerReport run_challenger(const ChallengerConfig& config);

// ---------------------------------------------------------------------------
// BMA equivalence

struct BmaEquivalenceReport {
  DecompositionResult conditioned_on_model;   // plan "1"  : parameters latent
  DecompositionResult conditioned_jointly;    // plan "1,2": (model, parameter) as one block
  DecompositionResult three_term;             // plan "1|2": model then parameter
  double max_total_spread = 0.0;              // max |total_i - total_j|
};

/// Computes the three decompositions in the scope of a two-level BMA model
/// (one discrete model-index factor plus the integrated parameter declared
/// as a factor) and reports how the same total splits differently.
BmaEquivalenceReport bma_equivalence_check(const HierarchicalModel& model,
                                           const Dataset& data);

/// Randomized Normal-Normal BMA instance for the equivalence check:
/// `components` models with random hyperparameters and a shared random
/// dataset, deterministic in the seed.
std::pair<HierarchicalModel, Dataset> make_random_bma(std::size_t components,
                                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Variable-set importance

/// Posterior probability of each level of `factor_index`, marginalizing the
/// joint factor posterior: p({X}_j | D) = sum_i p(m_i | D) p({X}_j | D, m_i).
std::vector<std::pair<std::string, double>> variable_set_importance(
    const HierarchicalModel& model, const PosteriorTable& posterior,
    std::size_t factor_index);

// ---------------------------------------------------------------------------
// Simulated binomial sweep

struct SweepConfig {
  std::vector<std::size_t> n_grid = {25, 50, 100, 200, 400};
  std::size_t replicates = 20;
  std::array<double, 10> true_beta = {0.75, 0.25, -0.3, 0.5, 0, 0, 0, 0, 0, 0};
  int trials = 30;
  std::uint64_t seed = 1729;
  double prior_sd = 10.0;
  std::size_t chain_length = 4000;
  std::size_t burn_in = 1000;

  void validate() const;
};

/// Three sweep terms in report order.
inline constexpr std::array<const char*, 3> kSweepTermNames = {"predictions", "models",
                                                               "links"};

struct SweepRow {
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::string term;
  double value = 0.0;
  double proportion = 0.0;
};

struct SweepCurvePoint {
  std::size_t n = 0;
  std::array<double, 3> values{};       // averaged term values
  std::array<double, 3> proportions{};  // averaged proportions, renormalized
  double total = 0.0;
  std::size_t replicates_used = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;           // per replicate and term
  std::vector<SweepCurvePoint> curves;  // one per grid point
  std::size_t failures = 0;             // replicates skipped due to fit failure
  std::size_t attempted = 0;
};

/// For each n and replicate: simulate data from the binomial GLM with the
/// configured true coefficients, fit the 3-link x 16-subset model space, and
/// decompose plan link|subset for the count at a fresh covariate point.
/// Replicates run in parallel; per-replicate seeds derive from
/// (seed, n, replicate), so the output is schedule-independent.
SweepResult run_sweep(const SweepConfig& config);

/// CSV renderings used by the CLI: the per-replicate table
/// (n,replicate,term_label,value,proportion) and the two curve files
/// (x = n, one column per term).
std::string sweep_rows_csv(const SweepResult& result);
std::string sweep_values_csv(const SweepResult& result);
std::string sweep_proportions_csv(const SweepResult& result);

// ---------------------------------------------------------------------------
// Small bundled models used by the CLI examples and tests

/// V1 in {a, b} with Bernoulli targets: the 0.2 / 0.6 toy.
std::pair<HierarchicalModel, Dataset> bernoulli_toy();

/// A 2x3x2 Bernoulli grid with non-uniform chain priors and a small dataset;
/// the K=3 discrete demonstration model.
std::pair<HierarchicalModel, Dataset> bernoulli_grid_demo();

/// The one-parameter Normal-Normal model (theta declared as the factor).
std::pair<HierarchicalModel, Dataset> normal_normal_example(double sigma, double tau0,
                                                            std::size_t n);

/// Prior-only Beta-Binomial model (p declared as the factor).
std::pair<HierarchicalModel, Dataset> beta_binomial_example(int trials, double a, double b);

}  // namespace ppv

#endif  // PPV_EXPERIMENTS_HPP
