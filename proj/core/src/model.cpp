#include "ppv/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace ppv {

namespace {

std::vector<std::size_t> level_sizes(const std::vector<FactorSpec>& factors) {
  std::vector<std::size_t> sizes;
  sizes.reserve(factors.size());
  for (const auto& f : factors) sizes.push_back(f.level_count());
  return sizes;
}

}  // namespace

void validate_factors(std::vector<FactorSpec>& factors) {
  constexpr double kSumTol = 1e-12;
  std::size_t rows_expected = 1;
  std::set<std::string> names;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    auto& f = factors[k];
    const std::string where = "factor '" + f.name + "' (V" + std::to_string(k + 1) + ")";
    if (f.levels.empty()) throw ValidationError(where + ": no levels declared");
    if (!names.insert(f.name).second)
      throw ValidationError("duplicate factor name '" + f.name + "'");
    std::set<std::string> labels(f.levels.begin(), f.levels.end());
    if (labels.size() != f.levels.size())
      throw ValidationError(where + ": duplicate level labels");

    if (f.prior_rows.size() == 1 && rows_expected > 1) {
      f.prior_rows.assign(rows_expected, f.prior_rows.front());
    }
    if (f.prior_rows.size() != rows_expected)
      throw ValidationError(where + ": expected " + std::to_string(rows_expected) +
                            " prior rows (one per assignment of earlier factors), got " +
                            std::to_string(f.prior_rows.size()));
    for (std::size_t r = 0; r < f.prior_rows.size(); ++r) {
      const auto& row = f.prior_rows[r];
      if (row.size() != f.levels.size())
        throw ValidationError(where + ": prior row " + std::to_string(r) + " has " +
                              std::to_string(row.size()) + " weights, expected " +
                              std::to_string(f.levels.size()));
      double sum = 0.0;
      for (double w : row) {
        if (!(w >= 0.0) || !std::isfinite(w))
          throw ValidationError(where + ": prior row " + std::to_string(r) +
                                " has a negative or non-finite weight");
        sum += w;
      }
      if (std::fabs(sum - 1.0) > kSumTol)
        throw ValidationError(where + ": prior row " + std::to_string(r) +
                              " sums to " + std::to_string(sum) + ", expected 1");
    }
    rows_expected *= f.levels.size();
  }
}

HierarchicalModel::HierarchicalModel(std::vector<FactorSpec> factors, BackendPtr backend,
                                     std::optional<std::string> parameter_factor_name)
    : factors_(std::move(factors)),
      backend_(std::move(backend)),
      parameter_name_(std::move(parameter_factor_name)) {
  if (factors_.empty() && !parameter_name_)
    throw ValidationError("a hierarchical model needs at least one factor (K >= 1)");
  validate_factors(factors_);
  grid_ = FactorGrid(level_sizes(factors_));
  if (!backend_) throw ValidationError("model has no backend");
  if (backend_->cell_count() != grid_.size())
    throw ValidationError("backend supplies " + std::to_string(backend_->cell_count()) +
                          " component models for a grid of " + std::to_string(grid_.size()));
  if (parameter_name_ && !backend_->has_parameter())
    throw ValidationError("backend family '" + backend_->family() +
                          "' has no integrated parameter; factor '" + *parameter_name_ +
                          "' cannot be declared as one");
}

std::string HierarchicalModel::factor_display(std::size_t k) const {
  if (parameter_name_ && k == parameter_factor()) return *parameter_name_;
  return factors_.at(k).name;
}

double HierarchicalModel::prior_weight(std::size_t cell) const {
  const auto levels = grid_.levels_of(cell);
  double w = 1.0;
  std::size_t row = 0;  // mixed-radix index over earlier factors
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    w *= factors_[k].prior_rows[row][static_cast<std::size_t>(levels[k])];
    row = row * factors_[k].level_count() + static_cast<std::size_t>(levels[k]);
  }
  return w;
}

std::string HierarchicalModel::describe_cell(std::size_t cell) const {
  const auto levels = grid_.levels_of(cell);
  std::ostringstream out;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (k) out << ", ";
    out << factors_[k].name << "=" << factors_[k].levels[static_cast<std::size_t>(levels[k])];
  }
  return out.str();
}

}  // namespace ppv
