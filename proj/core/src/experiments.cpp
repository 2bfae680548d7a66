#include "ppv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ppv/conjugate.hpp"
#include "ppv/parallel.hpp"
#include "ppv/report_io.hpp"

namespace ppv {

// ---------------------------------------------------------------------------
// Challenger data (Dalal, Fowlkes & Hoadley's 23-flight O-ring record)

namespace {

struct OringRow {
  int damaged;
  double t;
  double s;
};

constexpr std::array<OringRow, 23> kOringRows = {{
    {0, 66, 50},  {1, 70, 50},  {0, 69, 50},  {0, 68, 50},  {0, 67, 50},
    {0, 72, 50},  {0, 73, 100}, {0, 70, 100}, {1, 57, 200}, {1, 63, 200},
    {1, 70, 200}, {0, 78, 200}, {0, 67, 200}, {2, 53, 200}, {0, 67, 200},
    {0, 75, 200}, {0, 70, 200}, {0, 81, 200}, {0, 76, 200}, {0, 79, 200},
    {2, 75, 200}, {0, 76, 200}, {1, 58, 200},
}};

const std::vector<std::string> kSubsetLevels = {"t",   "t2",   "s",      "t+t2",
                                                "t+s", "t2+s", "t+t2+s", "none"};

// Draper's six retained models as (link level, subset level) pairs.
constexpr std::array<std::pair<int, int>, 6> kDraperModels = {{
    {0, 0}, {0, 3}, {0, 4}, {0, 6}, {0, 7}, {1, 6},
}};

}  // namespace

Dataset challenger_dataset() {
  std::vector<double> damaged, t, s;
  for (const auto& row : kOringRows) {
    damaged.push_back(static_cast<double>(row.damaged));
    t.push_back(row.t);
    s.push_back(row.s);
  }
  return Dataset(std::move(damaged), {{"t", std::move(t)}, {"s", std::move(s)}});
}

std::string challenger_csv_text() {
  std::ostringstream out;
  out << "damaged,t,s\n";
  for (const auto& row : kOringRows)
    out << row.damaged << "," << row.t << "," << row.s << "\n";
  return out.str();
}

HierarchicalModel challenger_model(const ChallengerConfig& config) {
  FactorSpec link;
  link.name = "link";
  link.levels = {"L", "C", "P"};
  FactorSpec subset;
  subset.name = "subset";
  subset.levels = kSubsetLevels;

  if (config.restricted) {
    // Zero prior outside Draper's six models, uniform over them, expressed
    // through the conditional prior chain.
    link.prior_rows = {{5.0 / 6.0, 1.0 / 6.0, 0.0}};
    std::vector<double> given_l(8, 0.0);
    for (const auto& [l, v2] : kDraperModels)
      if (l == 0) given_l[static_cast<std::size_t>(v2)] = 0.2;
    std::vector<double> given_c(8, 0.0);
    given_c[6] = 1.0;
    std::vector<double> given_p(8, 0.125);  // carries zero link weight
    subset.prior_rows = {given_l, given_c, given_p};
  } else {
    link.prior_rows = {std::vector<double>(3, 1.0 / 3.0)};
    subset.prior_rows = {std::vector<double>(8, 0.125)};
  }

  GlmGridConfig glm;
  glm.link_factor = 0;
  glm.subset_factor = 1;
  glm.trials = 6;
  glm.prior_sd = config.prior_sd;
  glm.derived = {{"t2", "t"}};
  glm.target = GlmTarget::kProbability;
  glm.x_new = {{"t", config.t_new}, {"s", config.s_new}};
  glm.chain_length = config.chain_length;
  glm.burn_in = config.burn_in;
  glm.seed = config.seed;

  std::vector<FactorSpec> factors = {link, subset};
  return HierarchicalModel(factors, std::make_shared<GlmBackend>(factors, std::move(glm)));
}

ChallengerReport run_challenger(const ChallengerConfig& config) {
  const Dataset data = challenger_dataset();

  ChallengerConfig full_config = config;
  full_config.restricted = false;
  const HierarchicalModel fitted = materialize(challenger_model(full_config), data);
  const PosteriorTable posterior = joint_posterior(fitted, data);

  DecompositionPlan three_plan{{{0}, {1}}, {}, 2};
  ChallengerReport report;
  report.three_term = decompose_exact(fitted, data, posterior, three_plan);
  report.drop_report = drop_term_report(report.three_term, 0.05);
  report.subset_importance = variable_set_importance(fitted, posterior, 1);

  const auto cells = fit_all_cells(fitted, data);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ModelTableRow row;
    row.index = c + 1;
    const auto levels = fitted.grid().levels_of(c);
    row.link = fitted.factor(0).levels[static_cast<std::size_t>(levels[0])];
    row.subset = fitted.factor(1).levels[static_cast<std::size_t>(levels[1])];
    row.log_marginal = cells[c].log_marginal;
    row.weight = posterior.weight(c);
    row.mean = cells[c].mean;
    row.variance = cells[c].variance();
    report.model_table.push_back(std::move(row));
  }

  // Draper's restriction reuses the fitted components under the zero-padded
  // prior; only the weights change.
  ChallengerConfig restricted_config = config;
  restricted_config.restricted = true;
  const HierarchicalModel restricted_spec = challenger_model(restricted_config);
  const HierarchicalModel restricted(restricted_spec.factors(), fitted.backend_ptr());
  const PosteriorTable restricted_posterior = joint_posterior(restricted, data);
  DecompositionPlan condensed{{{0, 1}}, {}, 2};
  report.restricted_two_term =
      decompose_exact(restricted, data, restricted_posterior, condensed);
  return report;
}

// ---------------------------------------------------------------------------
// BMA equivalence

BmaEquivalenceReport bma_equivalence_check(const HierarchicalModel& model,
                                           const Dataset& data) {
  if (!model.has_parameter_factor() || model.discrete_factor_count() != 1)
    throw ValidationError(
        "bma_equivalence_check needs one discrete model-index factor plus the "
        "integrated parameter declared as a factor");
  const PosteriorTable posterior = joint_posterior(model, data);

  BmaEquivalenceReport report;
  report.conditioned_on_model =
      decompose_exact(model, data, posterior, DecompositionPlan{{{0}}, {1}, 2});
  report.conditioned_jointly =
      decompose_exact(model, data, posterior, DecompositionPlan{{{0, 1}}, {}, 2});
  report.three_term =
      decompose_exact(model, data, posterior, DecompositionPlan{{{0}, {1}}, {}, 2});

  const std::array<double, 3> totals = {report.conditioned_on_model.total,
                                        report.conditioned_jointly.total,
                                        report.three_term.total};
  for (double a : totals)
    for (double b : totals)
      report.max_total_spread = std::max(report.max_total_spread, std::fabs(a - b));
  return report;
}

std::pair<HierarchicalModel, Dataset> make_random_bma(std::size_t components,
                                                      std::uint64_t seed) {
  if (components < 2) throw ValidationError("make_random_bma: need >= 2 components");
  RngStream rng = RngStream::derive(seed, 0xB3AULL);

  std::vector<NormalKnownVarSpec> comps;
  FactorSpec model_factor;
  model_factor.name = "model";
  for (std::size_t j = 0; j < components; ++j) {
    NormalKnownVarSpec c;
    c.sigma = rng.uniform(0.5, 2.0);
    c.theta0 = rng.uniform(-1.0, 1.0);
    c.tau0 = rng.uniform(0.5, 2.0);
    comps.push_back(c);
    model_factor.levels.push_back("M" + std::to_string(j + 1));
  }
  model_factor.prior_rows = {
      std::vector<double>(components, 1.0 / static_cast<double>(components))};

  const std::size_t n = 3 + rng.uniform_index(8);
  std::vector<double> ys;
  for (std::size_t i = 0; i < n; ++i) ys.push_back(rng.normal(0.2, 1.1));

  HierarchicalModel model({model_factor},
                          std::make_shared<NormalKnownVarBackend>(std::move(comps)),
                          std::string("theta"));
  return {std::move(model), Dataset(std::move(ys), {})};
}

// ---------------------------------------------------------------------------
// Variable-set importance

std::vector<std::pair<std::string, double>> variable_set_importance(
    const HierarchicalModel& model, const PosteriorTable& posterior,
    std::size_t factor_index) {
  const auto table = marginalize(model, posterior, {factor_index});
  const auto& levels = model.factor(factor_index).levels;
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t l = 0; l < levels.size(); ++l) out.emplace_back(levels[l], table.weights[l]);
  return out;
}

// ---------------------------------------------------------------------------
// Simulated binomial sweep

void SweepConfig::validate() const {
  if (n_grid.empty()) throw ValidationError("sweep: n_grid must be nonempty");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1])
      throw ValidationError("sweep: n_grid must be strictly increasing");
  if (replicates < 1) throw ValidationError("sweep: replicates must be >= 1");
  if (trials < 1) throw ValidationError("sweep: trials must be >= 1");
}

namespace {

std::vector<std::string> sweep_subset_levels() {
  // every subset of the four active covariates; the empty mask is the
  // intercept-only model
  std::vector<std::string> levels;
  for (std::uint32_t mask = 0; mask < 16; ++mask) {
    if (mask == 0) {
      levels.push_back("none");
      continue;
    }
    std::string label;
    for (std::uint32_t b = 0; b < 4; ++b) {
      if (mask & (1u << b)) {
        if (!label.empty()) label += "+";
        label += "x" + std::to_string(b + 1);
      }
    }
    levels.push_back(label);
  }
  return levels;
}

struct SweepReplicateOutcome {
  bool ok = false;
  std::array<double, 3> values{};
  std::array<double, 3> proportions{};
  double total = 0.0;
  std::string error;
};

SweepReplicateOutcome run_sweep_replicate(const SweepConfig& config, std::size_t n,
                                          std::uint64_t replicate_seed) {
  SweepReplicateOutcome out;
  RngStream rng = RngStream::derive(replicate_seed, 0xDA7AULL);

  std::map<std::string, std::vector<double>> covariates;
  std::vector<std::vector<double>*> cols;
  for (std::size_t j = 0; j < config.true_beta.size(); ++j) {
    auto& col = covariates["x" + std::to_string(j + 1)];
    col.resize(n);
    cols.push_back(&col);
  }
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < config.true_beta.size(); ++j) {
      const double x = rng.normal();
      (*cols[j])[i] = x;
      eta += config.true_beta[j] * x;
    }
    const double p = 1.0 / (1.0 + std::exp(-eta));
    ys[i] = static_cast<double>(rng.binomial(config.trials, p));
  }
  Dataset data(std::move(ys), std::move(covariates));

  std::map<std::string, double> x_new;
  for (std::size_t j = 0; j < config.true_beta.size(); ++j)
    x_new["x" + std::to_string(j + 1)] = rng.normal();

  FactorSpec link{"link", {"L", "C", "P"}, {std::vector<double>(3, 1.0 / 3.0)}};
  const auto subset_levels = sweep_subset_levels();
  FactorSpec subset{"subset", subset_levels,
                    {std::vector<double>(subset_levels.size(),
                                         1.0 / static_cast<double>(subset_levels.size()))}};

  GlmGridConfig glm;
  glm.link_factor = 0;
  glm.subset_factor = 1;
  glm.trials = config.trials;
  glm.prior_sd = config.prior_sd;
  glm.target = GlmTarget::kCount;
  glm.x_new = x_new;
  glm.chain_length = config.chain_length;
  glm.burn_in = config.burn_in;
  glm.seed = RngStream::derive(replicate_seed, 0xF17ULL).next_u64();

  try {
    std::vector<FactorSpec> factors = {link, subset};
    HierarchicalModel model(factors, std::make_shared<GlmBackend>(factors, std::move(glm)));
    const HierarchicalModel fitted = materialize(model, data);
    const PosteriorTable posterior = joint_posterior(fitted, data);
    const auto result =
        decompose_exact(fitted, data, posterior, DecompositionPlan{{{0}, {1}}, {}, 2});
    const auto props = result.proportions();
    for (std::size_t t = 0; t < 3; ++t) {
      out.values[t] = result.terms[t].value;
      out.proportions[t] = props[t];
    }
    out.total = result.total;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const std::size_t points = config.n_grid.size();
  const std::size_t jobs = points * config.replicates;

  std::vector<SweepReplicateOutcome> outcomes(jobs);
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t gi = job / config.replicates;
    const std::size_t rep = job % config.replicates;
    const std::uint64_t rep_seed =
        RngStream::derive(config.seed, config.n_grid[gi], rep).next_u64();
    outcomes[job] = run_sweep_replicate(config, config.n_grid[gi], rep_seed);
  });

  SweepResult result;
  result.attempted = jobs;
  for (std::size_t gi = 0; gi < points; ++gi) {
    SweepCurvePoint point;
    point.n = config.n_grid[gi];
    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
      const auto& o = outcomes[gi * config.replicates + rep];
      if (!o.ok) {
        ++result.failures;
        continue;
      }
      for (std::size_t t = 0; t < 3; ++t) {
        result.rows.push_back(
            {point.n, rep, kSweepTermNames[t], o.values[t], o.proportions[t]});
        point.values[t] += o.values[t];
        point.proportions[t] += o.proportions[t];
      }
      point.total += o.total;
      ++point.replicates_used;
    }
    if (point.replicates_used > 0) {
      const double k = static_cast<double>(point.replicates_used);
      for (std::size_t t = 0; t < 3; ++t) {
        point.values[t] /= k;
        point.proportions[t] /= k;
      }
      point.total /= k;
    }
    result.curves.push_back(point);
  }
  return result;
}

std::string sweep_rows_csv(const SweepResult& result) {
  std::string out = "n,replicate,term_label,value,proportion\n";
  for (const auto& row : result.rows) {
    out += std::to_string(row.n) + "," + std::to_string(row.replicate) + "," + row.term +
           "," + format_double(row.value) + "," + format_double(row.proportion) + "\n";
  }
  return out;
}

std::string sweep_values_csv(const SweepResult& result) {
  std::string out = "n,predictions,models,links,total\n";
  for (const auto& p : result.curves) {
    out += std::to_string(p.n);
    for (double v : p.values) out += "," + format_double(v);
    out += "," + format_double(p.total) + "\n";
  }
  return out;
}

std::string sweep_proportions_csv(const SweepResult& result) {
  std::string out = "n,predictions,models,links\n";
  for (const auto& p : result.curves) {
    out += std::to_string(p.n);
    for (double v : p.proportions) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundled toy models

std::pair<HierarchicalModel, Dataset> bernoulli_toy() {
  FactorSpec f{"component", {"a", "b"}, {{0.5, 0.5}}};
  HierarchicalModel model({f}, std::make_shared<BernoulliFixedBackend>(
                                   std::vector<double>{0.2, 0.6}));
  return {std::move(model), Dataset({}, {})};
}

std::pair<HierarchicalModel, Dataset> bernoulli_grid_demo() {
  FactorSpec v1{"family", {"f1", "f2"}, {{0.4, 0.6}}};
  FactorSpec v2{"shape", {"s1", "s2", "s3"}, {{0.5, 0.3, 0.2}, {0.2, 0.2, 0.6}}};
  FactorSpec v3{"scale", {"lo", "hi"}, {{0.5, 0.5}}};
  v3.prior_rows.assign(6, {0.5, 0.5});
  v3.prior_rows[2] = {0.9, 0.1};
  v3.prior_rows[5] = {0.0, 1.0};  // a zero-prior cell stays in the grid
  const std::vector<double> ps = {0.12, 0.35, 0.28, 0.51, 0.44, 0.67,
                                  0.23, 0.58, 0.31, 0.72, 0.49, 0.86};
  HierarchicalModel model({v1, v2, v3}, std::make_shared<BernoulliFixedBackend>(ps));
  return {std::move(model), Dataset({1.0, 0.0, 1.0, 1.0}, {})};
}

std::pair<HierarchicalModel, Dataset> normal_normal_example(double sigma, double tau0,
                                                            std::size_t n) {
  NormalKnownVarSpec spec;
  spec.sigma = sigma;
  spec.tau0 = tau0;
  spec.theta0 = 0.0;
  HierarchicalModel model({}, std::make_shared<NormalKnownVarBackend>(
                                  std::vector<NormalKnownVarSpec>{spec}),
                          std::string("theta"));
  // fixed bundled observations; the variance split depends only on n
  const std::array<double, 8> pool = {-0.3, 0.7, 1.2, 0.1, -0.9, 0.4, 1.6, -0.5};
  std::vector<double> ys;
  for (std::size_t i = 0; i < n; ++i) ys.push_back(pool[i % pool.size()]);
  return {std::move(model), Dataset(std::move(ys), {})};
}

std::pair<HierarchicalModel, Dataset> beta_binomial_example(int trials, double a, double b) {
  BetaBinomialSpec spec;
  spec.trials = trials;
  spec.a = a;
  spec.b = b;
  HierarchicalModel model({}, std::make_shared<BetaBinomialBackend>(
                                  std::vector<BetaBinomialSpec>{spec}),
                          std::string("p"));
  return {std::move(model), Dataset({}, {})};
}

}  // namespace ppv
