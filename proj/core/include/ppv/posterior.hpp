// Joint posteriors over factor assignments and mixture predictive moments
// under partial conditioning.

#ifndef PPV_POSTERIOR_HPP
#define PPV_POSTERIOR_HPP

#include <vector>

#include "ppv/model.hpp"

namespace ppv {

/// Normalized joint posterior W(v | D) over the full assignment grid.
/// Zero weights are stored explicitly; weights sum to 1 within 1e-10.
struct PosteriorTable {
  std::vector<double> weights;  // grid order
  double log_evidence = 0.0;    // log sum_v prior(v) m_v(D)

  double weight(std::size_t cell) const { return weights[cell]; }
  std::size_t size() const { return weights.size(); }
};

/// Marginal weight table over a subset of factors (ascending factor order,
/// mixed-radix indexing as in FactorGrid).
struct MarginalTable {
  std::vector<std::size_t> factors;  // 0-based, ascending
  FactorGrid grid;
  std::vector<double> weights;
};

/// entry(v) proportional to prior(v) * m_v(data), combined in log space and
/// normalized by log-sum-exp.  Throws DegeneratePosteriorError if every
/// unnormalized weight is zero, BackendError (naming the assignment) if a
/// component fails to evaluate.
PosteriorTable joint_posterior(const HierarchicalModel& model, const Dataset& data);

/// Mixture predictive moments given a partial assignment: latent (unbound)
/// factors are mixed out under the conditional posterior.  With full scope
/// this is the backend's moments; with empty scope it is the total.
/// Throws NullEventError when the partial assignment has zero mass.
PredictiveMoments conditional_moments(const HierarchicalModel& model, const Dataset& data,
                                      const PosteriorTable& posterior,
                                      const FactorAssignment& partial);

/// As above, but over precomputed component summaries (one per grid cell) so
/// expensive backends are fit once.
PredictiveMoments conditional_moments(const HierarchicalModel& model,
                                      const std::vector<ComponentSummary>& cells,
                                      const PosteriorTable& posterior,
                                      const FactorAssignment& partial);

/// Sum the posterior down to the factors in `keep` (nonempty).  The result
/// sums to 1 within 1e-10.
MarginalTable marginalize(const HierarchicalModel& model, const PosteriorTable& posterior,
                          const std::vector<std::size_t>& keep);

/// Fit every grid cell (in parallel for non-closed-form backends).
std::vector<ComponentSummary> fit_all_cells(const HierarchicalModel& model,
                                            const Dataset& data);

}  // namespace ppv

#endif  // PPV_POSTERIOR_HPP
