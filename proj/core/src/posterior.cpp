#include "ppv/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ppv/parallel.hpp"

namespace ppv {

std::vector<ComponentSummary> fit_all_cells(const HierarchicalModel& model,
                                            const Dataset& data) {
  const std::size_t n = model.grid().size();
  std::vector<ComponentSummary> cells(n);
  auto fit_one = [&](std::size_t c) {
    try {
      cells[c] = model.backend().fit(c, data);
    } catch (const std::exception& e) {
      throw BackendError("assignment {" + model.describe_cell(c) + "}: " + e.what());
    }
  };
  if (model.backend().closed_form()) {
    for (std::size_t c = 0; c < n; ++c) fit_one(c);
  } else {
    parallel_for(n, fit_one);
  }
  return cells;
}

PosteriorTable joint_posterior(const HierarchicalModel& model, const Dataset& data) {
  const std::size_t n = model.grid().size();
  const auto cells = fit_all_cells(model, data);

  std::vector<double> log_unnorm(n, -std::numeric_limits<double>::infinity());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    const double prior = model.prior_weight(c);
    const double lm = cells[c].log_marginal;
    if (std::isnan(lm) || lm == std::numeric_limits<double>::infinity())
      throw BackendError("marginal likelihood is not finite for assignment {" +
                         model.describe_cell(c) + "}");
    if (prior > 0.0) {
      log_unnorm[c] = std::log(prior) + lm;
      max_log = std::max(max_log, log_unnorm[c]);
    }
  }
  if (!std::isfinite(max_log))
    throw DegeneratePosteriorError(
        "all unnormalized posterior weights are zero; no assignment explains the data");

  double total = 0.0;
  PosteriorTable table;
  table.weights.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    if (std::isfinite(log_unnorm[c])) {
      table.weights[c] = std::exp(log_unnorm[c] - max_log);
      total += table.weights[c];
    }
  }
  if (!(total > 0.0))
    throw DegeneratePosteriorError("posterior normalization underflowed to zero");
  for (double& w : table.weights) w /= total;
  table.log_evidence = max_log + std::log(total);
  return table;
}

PredictiveMoments conditional_moments(const HierarchicalModel& model,
                                      const std::vector<ComponentSummary>& cells,
                                      const PosteriorTable& posterior,
                                      const FactorAssignment& partial) {
  if (partial.factor_count() != model.discrete_factor_count())
    throw ValidationError("partial assignment is over a different factor count");
  const auto& grid = model.grid();

  double mass = 0.0, mean_acc = 0.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (!grid.matches(c, partial)) continue;
    mass += posterior.weight(c);
    mean_acc += posterior.weight(c) * cells[c].mean;
  }
  if (!(mass > 0.0)) {
    std::string bound;
    for (std::size_t k : partial.scope()) {
      if (!bound.empty()) bound += ", ";
      bound += model.factor(k).name + "=" +
               model.factor(k).levels[static_cast<std::size_t>(partial.level(k))];
    }
    throw NullEventError("conditioning on a null event: {" + bound +
                         "} has zero posterior mass");
  }
  const double mean = mean_acc / mass;
  double var = 0.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (!grid.matches(c, partial)) continue;
    const double w = posterior.weight(c) / mass;
    const double d = cells[c].mean - mean;
    var += w * (cells[c].variance() + d * d);
  }
  return {mean, var};
}

PredictiveMoments conditional_moments(const HierarchicalModel& model, const Dataset& data,
                                      const PosteriorTable& posterior,
                                      const FactorAssignment& partial) {
  return conditional_moments(model, fit_all_cells(model, data), posterior, partial);
}

MarginalTable marginalize(const HierarchicalModel& model, const PosteriorTable& posterior,
                          const std::vector<std::size_t>& keep) {
  if (keep.empty())
    throw ValidationError("marginalize: the kept factor set must be nonempty");
  std::vector<std::size_t> sorted = keep;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t k : sorted) {
    if (k >= model.discrete_factor_count())
      throw ValidationError("marginalize: factor index " + std::to_string(k + 1) +
                            " is not a discrete factor of the model");
  }

  std::vector<std::size_t> sizes;
  sizes.reserve(sorted.size());
  for (std::size_t k : sorted) sizes.push_back(model.factor(k).level_count());

  MarginalTable out;
  out.factors = sorted;
  out.grid = FactorGrid(sizes);
  out.weights.assign(out.grid.size(), 0.0);

  const auto& grid = model.grid();
  for (std::size_t c = 0; c < grid.size(); ++c) {
    std::vector<int> sub(sorted.size());
    for (std::size_t j = 0; j < sorted.size(); ++j) sub[j] = grid.level_at(c, sorted[j]);
    out.weights[out.grid.index_of(sub)] += posterior.weight(c);
  }
  return out;
}

}  // namespace ppv
