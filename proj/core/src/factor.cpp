#include "ppv/factor.hpp"

#include <cmath>

namespace ppv {

FactorGrid::FactorGrid(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  strides_.assign(sizes_.size(), 1);
  total_ = 1;  // the empty grid has one (empty) cell
  for (std::size_t k = sizes_.size(); k-- > 0;) {
    if (sizes_[k] == 0) throw ValidationError("factor with zero levels");
    strides_[k] = total_;
    total_ *= sizes_[k];
  }
}

std::size_t FactorGrid::index_of(const std::vector<int>& levels) const {
  if (levels.size() != sizes_.size())
    throw ValidationError("assignment length does not match factor count");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (levels[k] < 0 || static_cast<std::size_t>(levels[k]) >= sizes_[k])
      throw ValidationError("level out of range for factor " + std::to_string(k + 1));
    idx += static_cast<std::size_t>(levels[k]) * strides_[k];
  }
  return idx;
}

std::vector<int> FactorGrid::levels_of(std::size_t index) const {
  std::vector<int> levels(sizes_.size());
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    levels[k] = static_cast<int>((index / strides_[k]) % sizes_[k]);
  }
  return levels;
}

int FactorGrid::level_at(std::size_t index, std::size_t factor) const {
  return static_cast<int>((index / strides_.at(factor)) % sizes_.at(factor));
}

bool FactorGrid::matches(std::size_t index, const FactorAssignment& partial) const {
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (partial.is_bound(k) && partial.level(k) != level_at(index, k)) return false;
  }
  return true;
}

Dataset::Dataset(std::vector<double> responses,
                 std::map<std::string, std::vector<double>> covariates)
    : responses_(std::move(responses)), covariates_(std::move(covariates)) {
  for (const auto& [name, col] : covariates_) {
    if (col.size() != responses_.size())
      throw ValidationError("covariate column '" + name + "' has " +
                            std::to_string(col.size()) + " rows, expected " +
                            std::to_string(responses_.size()));
  }
}

const std::vector<double>& Dataset::covariate(const std::string& name) const {
  auto it = covariates_.find(name);
  if (it == covariates_.end())
    throw ValidationError("dataset has no covariate named '" + name + "'");
  return it->second;
}

void check_moments(const PredictiveMoments& m, const std::string& context) {
  if (!std::isfinite(m.mean) || !std::isfinite(m.variance))
    throw ValidationError(context + ": non-finite predictive moments");
  if (m.variance < 0.0)
    throw ValidationError(context + ": negative predictive variance");
}

}  // namespace ppv
