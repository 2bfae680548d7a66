// Data model for hierarchical factor structures: discrete modeling choices
// V_1..V_K with conditional prior weights, partial assignments of them, and
// the datasets they condition on.

#ifndef PPV_FACTOR_HPP
#define PPV_FACTOR_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppv/errors.hpp"

namespace ppv {

/// One discrete factor: a named modeling choice with finitely many levels and
/// a conditional prior over them.
///
/// `prior_rows` holds one weight vector per assignment of the *earlier*
/// factors, in mixed-radix grid order with the first factor as the most
/// significant digit.  The first factor has exactly one row.  A single row
/// supplied for a later factor is broadcast over all earlier assignments.
struct FactorSpec {
  std::string name;
  std::vector<std::string> levels;
  std::vector<std::vector<double>> prior_rows;

  std::size_t level_count() const { return levels.size(); }
};

/// Partial or full assignment of levels to factors.  Unbound factors are the
/// latent set.  Factor indices are 0-based internally; the public text
/// interfaces use the 1-based V1..VK convention.
class FactorAssignment {
 public:
  FactorAssignment() = default;
  explicit FactorAssignment(std::size_t factor_count)
      : levels_(factor_count, kUnbound) {}

  static constexpr int kUnbound = -1;

  std::size_t factor_count() const { return levels_.size(); }
  bool is_bound(std::size_t factor) const { return levels_.at(factor) != kUnbound; }
  int level(std::size_t factor) const { return levels_.at(factor); }
  void bind(std::size_t factor, int level) { levels_.at(factor) = level; }
  void unbind(std::size_t factor) { levels_.at(factor) = kUnbound; }

  bool fully_bound() const {
    for (int l : levels_) if (l == kUnbound) return false;
    return true;
  }
  bool empty_scope() const {
    for (int l : levels_) if (l != kUnbound) return false;
    return true;
  }
  std::vector<std::size_t> scope() const {
    std::vector<std::size_t> s;
    for (std::size_t k = 0; k < levels_.size(); ++k)
      if (levels_[k] != kUnbound) s.push_back(k);
    return s;
  }

  bool operator==(const FactorAssignment&) const = default;

 private:
  std::vector<int> levels_;
};

/// Mixed-radix indexing over the full level grid of a factor list.
/// Factor 0 is the most significant digit.
class FactorGrid {
 public:
  FactorGrid() = default;
  explicit FactorGrid(std::vector<std::size_t> sizes);

  std::size_t factor_count() const { return sizes_.size(); }
  std::size_t size() const { return total_; }
  std::size_t level_count(std::size_t factor) const { return sizes_.at(factor); }

  std::size_t index_of(const std::vector<int>& levels) const;
  std::vector<int> levels_of(std::size_t index) const;
  int level_at(std::size_t index, std::size_t factor) const;

  /// True when the grid cell `index` agrees with every bound factor of
  /// `partial`.
  bool matches(std::size_t index, const FactorAssignment& partial) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

/// Observed data: responses y_1..y_n plus optional named covariate columns.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<double> responses,
          std::map<std::string, std::vector<double>> covariates);

  std::size_t n() const { return responses_.size(); }
  const std::vector<double>& responses() const { return responses_; }
  const std::map<std::string, std::vector<double>>& covariates() const { return covariates_; }
  bool has_covariate(const std::string& name) const { return covariates_.count(name) != 0; }
  const std::vector<double>& covariate(const std::string& name) const;

 private:
  std::vector<double> responses_;
  std::map<std::string, std::vector<double>> covariates_;
};

/// First two moments of the predictive target given some conditioning.
struct PredictiveMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Throws ValidationError unless the moments are finite with variance >= 0.
void check_moments(const PredictiveMoments& m, const std::string& context);

}  // namespace ppv

#endif  // PPV_FACTOR_HPP
