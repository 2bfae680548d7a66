// Per-assignment predictive backends.  Each full factor assignment resolves
// to one component model that supplies a marginal likelihood and the first
// two moments of the predictive target, split into the part explained by its
// internal (integrated) parameter and the part left underneath it.

#ifndef PPV_BACKEND_HPP
#define PPV_BACKEND_HPP

#include <memory>
#include <string>

#include "ppv/factor.hpp"
#include "ppv/rng.hpp"

namespace ppv {

/// Fitted view of one component model (one full assignment v).
///
/// `within_var`  = E_param[ Var(target | param, v, D) ]
/// `between_var` = Var_param[ E(target | param, v, D) ]
/// and within_var + between_var is the full predictive variance given v.
/// Backends without an internal parameter report between_var = 0.
struct ComponentSummary {
  double log_marginal = 0.0;
  double mean = 0.0;
  double within_var = 0.0;
  double between_var = 0.0;

  double variance() const { return within_var + between_var; }
  PredictiveMoments moments() const { return {mean, variance()}; }
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// Number of component models; must equal the model's full grid size.
  virtual std::size_t cell_count() const = 0;

  /// Whether the backend integrates a continuous parameter that plans may
  /// condition on (the innermost hierarchy level).
  virtual bool has_parameter() const = 0;

  /// Whether summaries are exact closed forms.  When false (draw-derived
  /// summaries) the Monte Carlo engine re-estimates inner moments from the
  /// sampling hooks instead of treating the summary as noiseless.
  virtual bool closed_form() const { return true; }

  /// Fit component `cell` on `data`.  Throws BackendError naming the cell on
  /// failure.  Deterministic: refitting the same cell/data reproduces the
  /// same summary bit for bit.
  virtual ComponentSummary fit(std::size_t cell, const Dataset& data) const = 0;

  /// Draw param ~ posterior(param | cell, data) and return E(target | param).
  virtual double sample_conditional_mean(std::size_t cell, const Dataset& data,
                                         RngStream& rng) const = 0;

  /// Draw param ~ posterior(param | cell, data) and return Var(target | param).
  virtual double sample_conditional_var(std::size_t cell, const Dataset& data,
                                        RngStream& rng) const = 0;

  virtual std::string family() const = 0;
};

using BackendPtr = std::shared_ptr<const Backend>;

}  // namespace ppv

#endif  // PPV_BACKEND_HPP
