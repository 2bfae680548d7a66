// Term-by-term evaluation of a decomposition plan, by exact nested weighted
// sums over the factor grid or by nested Monte Carlo, plus the conservation
// check that the terms re-assemble the fixed total predictive variance.

#ifndef PPV_DECOMPOSE_HPP
#define PPV_DECOMPOSE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ppv/cscope.hpp"
#include "ppv/posterior.hpp"

namespace ppv {

enum class Engine { kExact, kMonteCarlo };

std::string engine_name(Engine e);

struct TermEstimate {
  TermLabel label;
  double value = 0.0;
  double std_error = 0.0;  // 0 for the exact engine
  Engine engine = Engine::kExact;
};

struct McBudget {
  std::size_t outer = 0;
  std::size_t inner = 0;
};

struct DecompositionResult {
  DecompositionPlan plan;
  std::vector<TermEstimate> terms;  // leading term first, then Var terms m..1
  double total = 0.0;               // Var(Y_{n+1} | D), plan-independent
  double residual = 0.0;            // total - sum(terms)
  double residual_se = 0.0;         // 0 for exact
  Engine engine = Engine::kExact;
  std::uint64_t seed = 0;
  McBudget budget{};

  std::vector<double> proportions() const;
  double term_sum() const;
  /// Exact: |residual| <= 1e-10 max(1, |total|).  Monte Carlo: |residual|
  /// within 3 residual SEs (or the exact tolerance when the SE is zero).
  bool conservation_ok() const;
};

/// The fixed left-hand side of every decomposition: predictive moments with
/// empty conditioning scope.
PredictiveMoments total_variance(const HierarchicalModel& model, const Dataset& data,
                                 const PosteriorTable& posterior);

/// Exact engine: every term as a nested weighted sum over the grid.
/// Zero-mass conditioning cells contribute nothing and are skipped.
DecompositionResult decompose_exact(const HierarchicalModel& model, const Dataset& data,
                                    const PosteriorTable& posterior,
                                    const DecompositionPlan& plan);

/// Nested Monte Carlo engine.  Outer samples draw factor assignments from
/// the (conditional) posterior table; the backend's integrated parameter and
/// any draw-based moments are estimated from inner sampling-hook draws, with
/// independent split halves so variance terms stay unbiased.  Sample
/// variances use the n-1 divisor.  Deterministic given (seed, budget): the
/// stream for (term j, outer sample i) is derived by counter, so results do
/// not depend on scheduling.
DecompositionResult decompose_mc(const HierarchicalModel& model, const Dataset& data,
                                 const PosteriorTable& posterior,
                                 const DecompositionPlan& plan, McBudget budget,
                                 std::uint64_t seed);

struct DropTermEntry {
  std::string label;
  double value = 0.0;
  double proportion = 0.0;
  /// Set for the trailing Var_{B_1}E term only: dropping it licenses fixing
  /// the factors of B_1.
  bool suggests_removal = false;
  std::vector<std::size_t> removable_factors;  // 0-based
  std::string reduced_expression;
};

struct DropTermReport {
  double threshold = 0.0;
  std::vector<DropTermEntry> entries;  // empty when nothing is below threshold
};

/// Terms whose proportion of the total falls below `threshold`.  Only the
/// trailing term names a factor whose removal it suggests; for that entry the
/// decomposition that would remain after fixing the factor is rendered.
DropTermReport drop_term_report(const DecompositionResult& result, double threshold);

}  // namespace ppv

#endif  // PPV_DECOMPOSE_HPP
