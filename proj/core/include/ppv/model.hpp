#ifndef PPV_MODEL_HPP
#define PPV_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "ppv/backend.hpp"
#include "ppv/factor.hpp"

namespace ppv {

/// A Bayesian hierarchical model over K modeling-choice factors.
///
/// The discrete factors span a full assignment grid; each grid cell resolves
/// to one backend component supplying the marginal likelihood and predictive
/// moments with any continuous parameters already integrated out.  A model
/// may additionally declare that its backend's integrated parameter is
/// visible as the innermost factor (index K), so plans can condition on it;
/// see HierarchicalModel::parameter_factor().
class HierarchicalModel {
 public:
  HierarchicalModel(std::vector<FactorSpec> factors, BackendPtr backend,
                    std::optional<std::string> parameter_factor_name = std::nullopt);

  /// Total K: discrete factors plus the parameter factor when declared.
  std::size_t factor_count() const {
    return factors_.size() + (parameter_name_ ? 1 : 0);
  }
  std::size_t discrete_factor_count() const { return factors_.size(); }

  const std::vector<FactorSpec>& factors() const { return factors_; }
  const FactorSpec& factor(std::size_t k) const { return factors_.at(k); }
  const FactorGrid& grid() const { return grid_; }
  const Backend& backend() const { return *backend_; }
  BackendPtr backend_ptr() const { return backend_; }

  bool has_parameter_factor() const { return parameter_name_.has_value(); }
  /// 0-based index of the parameter factor (always the last one).
  std::size_t parameter_factor() const { return factors_.size(); }
  const std::string& parameter_factor_name() const { return *parameter_name_; }

  /// Display name "V3" or the declared factor name, for labels and errors.
  std::string factor_display(std::size_t k) const;

  /// Chain-product prior weight of a full discrete assignment (grid cell).
  double prior_weight(std::size_t cell) const;

  /// Human-readable "link=L, subset=t" string for a grid cell.
  std::string describe_cell(std::size_t cell) const;

 private:
  std::vector<FactorSpec> factors_;
  FactorGrid grid_;
  BackendPtr backend_;
  std::optional<std::string> parameter_name_;
};

/// Validates a factor list: unique level labels, prior rows of the right
/// shape, nonnegative weights summing to 1 within 1e-12.  Broadcasts
/// single-row priors.  Throws ValidationError with the factor named.
void validate_factors(std::vector<FactorSpec>& factors);

}  // namespace ppv

#endif  // PPV_MODEL_HPP
