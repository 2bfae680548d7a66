#include "ppv/decompose.hpp"

#include <algorithm>
#include <cmath>

#include "ppv/parallel.hpp"
#include "ppv/rng.hpp"

namespace ppv {

std::string engine_name(Engine e) {
  return e == Engine::kExact ? "exact" : "mc";
}

std::vector<double> DecompositionResult::proportions() const {
  std::vector<double> p;
  p.reserve(terms.size());
  for (const auto& t : terms) p.push_back(total != 0.0 ? t.value / total : 0.0);
  return p;
}

double DecompositionResult::term_sum() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.value;
  return s;
}

bool DecompositionResult::conservation_ok() const {
  const double tol_exact = 1e-10 * std::max(1.0, std::fabs(total));
  if (engine == Engine::kExact) return std::fabs(residual) <= tol_exact;
  return std::fabs(residual) <= std::max(3.0 * residual_se, tol_exact);
}

namespace {

// ---------------------------------------------------------------------------
// Plan analysis against a concrete model.

struct PlanShape {
  // Discrete factors of each original block (the parameter factor stripped).
  std::vector<std::vector<std::size_t>> dblocks;
  std::vector<std::size_t> latent_discrete;
  bool param_manifest = false;  // parameter factor sits in the last block
};

PlanShape analyze_plan(const HierarchicalModel& model, const DecompositionPlan& plan) {
  if (plan.factor_count != model.factor_count())
    throw PlanError("plan is over K=" + std::to_string(plan.factor_count) +
                    " factors but the model declares K=" +
                    std::to_string(model.factor_count()));
  if (const auto why = plan.violation(); !why.empty())
    throw PlanError("invalid plan: " + why);

  PlanShape shape;
  shape.dblocks.resize(plan.blocks.size());
  const bool has_param = model.has_parameter_factor();
  const std::size_t param = has_param ? model.parameter_factor() : plan.factor_count;

  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    for (std::size_t k : plan.blocks[b]) {
      if (k == param && has_param) {
        if (b + 1 != plan.blocks.size())
          throw PlanError("the integrated parameter '" + model.parameter_factor_name() +
                          "' (V" + std::to_string(k + 1) +
                          ") can only be conditioned on in the innermost block");
        shape.param_manifest = true;
      } else {
        shape.dblocks[b].push_back(k);
      }
    }
  }
  for (std::size_t k : plan.latent) {
    if (!(has_param && k == param)) shape.latent_discrete.push_back(k);
  }
  if (shape.param_manifest && !shape.latent_discrete.empty())
    throw PlanError("conditioning on the integrated parameter requires every discrete "
                    "factor to be manifest (a latent model index would leave the "
                    "parameter's meaning undefined)");
  return shape;
}

// ---------------------------------------------------------------------------
// Nested weighted sums over the grid.

class SubsetGrid {
 public:
  SubsetGrid(const HierarchicalModel& model, std::vector<std::size_t> factors)
      : factors_(std::move(factors)) {
    std::vector<std::size_t> sizes;
    sizes.reserve(factors_.size());
    for (std::size_t k : factors_) sizes.push_back(model.factor(k).level_count());
    grid_ = FactorGrid(sizes);
  }

  std::size_t size() const { return grid_.size(); }

  void bind(std::size_t index, FactorAssignment& partial) const {
    for (std::size_t j = 0; j < factors_.size(); ++j)
      partial.bind(factors_[j], grid_.level_at(index, j));
  }

 private:
  std::vector<std::size_t> factors_;
  FactorGrid grid_;
};

struct EngineContext {
  const HierarchicalModel& model;
  const std::vector<ComponentSummary>& cells;
  const PosteriorTable& post;
  PlanShape shape;

  double mass(const FactorAssignment& partial) const {
    double m = 0.0;
    for (std::size_t c = 0; c < post.size(); ++c)
      if (model.grid().matches(c, partial)) m += post.weight(c);
    return m;
  }

  double mix_mean(const FactorAssignment& partial, double mass) const {
    double s = 0.0;
    for (std::size_t c = 0; c < post.size(); ++c)
      if (model.grid().matches(c, partial)) s += post.weight(c) * cells[c].mean;
    return s / mass;
  }

  std::size_t cell_of(const FactorAssignment& full) const {
    std::vector<int> levels(model.discrete_factor_count());
    for (std::size_t k = 0; k < levels.size(); ++k) levels[k] = full.level(k);
    return model.grid().index_of(levels);
  }
};

std::vector<std::size_t> union_through(const std::vector<std::vector<std::size_t>>& blocks,
                                       std::size_t end) {
  std::vector<std::size_t> u;
  for (std::size_t b = 0; b < end; ++b) u.insert(u.end(), blocks[b].begin(), blocks[b].end());
  std::sort(u.begin(), u.end());
  return u;
}

// E over C of Var over B of the conditional mean.  With `add_between`, C u B
// covers every discrete factor and the Var is joint with the integrated
// parameter, so each inner cell contributes its between-parameter variance
// on top of the spread of means.
double exact_var_term(const EngineContext& ctx, const std::vector<std::size_t>& C,
                      const std::vector<std::size_t>& B, bool add_between) {
  const SubsetGrid cgrid(ctx.model, C);
  const SubsetGrid bgrid(ctx.model, B);
  const std::size_t nd = ctx.model.discrete_factor_count();

  double term = 0.0;
  for (std::size_t ci = 0; ci < cgrid.size(); ++ci) {
    FactorAssignment pc(nd);
    cgrid.bind(ci, pc);
    const double wc = ctx.mass(pc);
    if (!(wc > 0.0)) continue;  // zero-mass conditioning cells carry no weight

    std::vector<double> w, mu, extra;
    for (std::size_t bi = 0; bi < bgrid.size(); ++bi) {
      FactorAssignment pcb = pc;
      bgrid.bind(bi, pcb);
      const double wcb = ctx.mass(pcb);
      if (!(wcb > 0.0)) continue;
      w.push_back(wcb / wc);
      mu.push_back(ctx.mix_mean(pcb, wcb));
      extra.push_back(add_between ? ctx.cells[ctx.cell_of(pcb)].between_var : 0.0);
    }
    double mbar = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mbar += w[i] * mu[i];
    double inner = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = mu[i] - mbar;
      inner += w[i] * (extra[i] + d * d);
    }
    term += wc * inner;
  }
  return term;
}

// E over every block of the variance given all of them, with latent factors
// mixed inside.  When the parameter is manifest the conditional variance per
// cell is the within-parameter part only.
double exact_leading_term(const EngineContext& ctx) {
  const auto manifest = union_through(ctx.shape.dblocks, ctx.shape.dblocks.size());
  const SubsetGrid agrid(ctx.model, manifest);
  const std::size_t nd = ctx.model.discrete_factor_count();

  double term = 0.0;
  for (std::size_t ai = 0; ai < agrid.size(); ++ai) {
    FactorAssignment pa(nd);
    agrid.bind(ai, pa);
    const double wa = ctx.mass(pa);
    if (!(wa > 0.0)) continue;
    const double mean_a = ctx.mix_mean(pa, wa);
    double mv = 0.0;
    for (std::size_t c = 0; c < ctx.post.size(); ++c) {
      if (!ctx.model.grid().matches(c, pa)) continue;
      const double w = ctx.post.weight(c) / wa;
      const double base = ctx.shape.param_manifest ? ctx.cells[c].within_var
                                                   : ctx.cells[c].variance();
      const double d = ctx.cells[c].mean - mean_a;
      mv += w * (base + d * d);
    }
    term += wa * mv;
  }
  return term;
}

}  // namespace

PredictiveMoments total_variance(const HierarchicalModel& model, const Dataset& data,
                                 const PosteriorTable& posterior) {
  return conditional_moments(model, data, posterior,
                             FactorAssignment(model.discrete_factor_count()));
}

DecompositionResult decompose_exact(const HierarchicalModel& model, const Dataset& data,
                                    const PosteriorTable& posterior,
                                    const DecompositionPlan& plan) {
  const auto cells = fit_all_cells(model, data);
  EngineContext ctx{model, cells, posterior, analyze_plan(model, plan)};

  DecompositionResult result;
  result.plan = plan;
  result.engine = Engine::kExact;
  result.total =
      conditional_moments(model, cells, posterior,
                          FactorAssignment(model.discrete_factor_count()))
          .variance;

  const auto labels = term_labels(plan);
  const std::size_t m = plan.blocks.size();

  result.terms.push_back({labels[0], exact_leading_term(ctx), 0.0, Engine::kExact});
  for (std::size_t out = 1; out <= m; ++out) {
    const std::size_t j = labels[out].var_block;  // m-1 down to 0
    const auto C = union_through(ctx.shape.dblocks, j);
    const bool with_param = ctx.shape.param_manifest && (j + 1 == m);
    const double value = exact_var_term(ctx, C, ctx.shape.dblocks[j], with_param);
    result.terms.push_back({labels[out], value, 0.0, Engine::kExact});
  }
  result.residual = result.total - result.term_sum();
  result.residual_se = 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Nested Monte Carlo engine.

namespace {

struct McContext {
  const EngineContext& ctx;
  const Dataset& data;
  McBudget budget;
  bool closed;  // backend summaries are exact closed forms

  // Split-half mean estimates for one grid cell; equal halves when closed.
  void cell_mean_halves(std::size_t cell, RngStream& rng, double& a, double& b) const {
    if (closed) {
      a = b = ctx.cells[cell].mean;
      return;
    }
    const std::size_t na = budget.inner / 2;
    const std::size_t nb = budget.inner - na;
    double sa = 0.0, sb = 0.0;
    for (std::size_t t = 0; t < na; ++t)
      sa += ctx.model.backend().sample_conditional_mean(cell, data, rng);
    for (std::size_t t = 0; t < nb; ++t)
      sb += ctx.model.backend().sample_conditional_mean(cell, data, rng);
    a = sa / static_cast<double>(na);
    b = sb / static_cast<double>(nb);
  }

  // Unbiased draw-based estimate of Var_param E(target | param, cell).
  double cell_between_est(std::size_t cell, RngStream& rng) const {
    std::vector<double> draws(budget.inner);
    for (auto& d : draws)
      d = ctx.model.backend().sample_conditional_mean(cell, data, rng);
    return sample_variance(draws);
  }

  // Draw-based estimate of E_param Var(target | param, cell).
  double cell_within_est(std::size_t cell, RngStream& rng) const {
    std::vector<double> draws(budget.inner);
    for (auto& d : draws)
      d = ctx.model.backend().sample_conditional_var(cell, data, rng);
    return pairwise_mean(draws);
  }
};

// Mixture mean over completions of `partial`, as independent half estimates.
void mixture_mean_halves(const McContext& mc, const FactorAssignment& partial, double mass,
                         RngStream& rng, double& a, double& b) {
  a = b = 0.0;
  for (std::size_t c = 0; c < mc.ctx.post.size(); ++c) {
    if (!mc.ctx.model.grid().matches(c, partial)) continue;
    const double w = mc.ctx.post.weight(c) / mass;
    if (!(w > 0.0)) continue;
    double ma, mb;
    mc.cell_mean_halves(c, rng, ma, mb);
    a += w * ma;
    b += w * mb;
  }
}

// One outer contribution to a Var-over-B term at outer assignment pc.
double var_term_contribution(const McContext& mc, const FactorAssignment& pc,
                             const SubsetGrid& bgrid, bool with_param, RngStream& rng) {
  const double wc = mc.ctx.mass(pc);
  std::vector<double> w, mu_a, mu_b, extra;
  for (std::size_t bi = 0; bi < bgrid.size(); ++bi) {
    FactorAssignment pcb = pc;
    bgrid.bind(bi, pcb);
    const double wcb = mc.ctx.mass(pcb);
    if (!(wcb > 0.0)) continue;
    w.push_back(wcb / wc);
    double a, b;
    if (with_param) {
      const std::size_t cell = mc.ctx.cell_of(pcb);
      extra.push_back(mc.cell_between_est(cell, rng));
      mc.cell_mean_halves(cell, rng, a, b);
    } else {
      extra.push_back(0.0);
      mixture_mean_halves(mc, pcb, wcb, rng, a, b);
    }
    mu_a.push_back(a);
    mu_b.push_back(b);
  }

  double g = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) g += w[i] * extra[i];
  if (mc.closed) {
    // halves coincide; use the numerically stable centered form
    double mbar = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mbar += w[i] * mu_a[i];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = mu_a[i] - mbar;
      g += w[i] * d * d;
    }
  } else {
    // cross products of independent halves keep the spread unbiased
    double mix_a = 0.0, mix_b = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mix_a += w[i] * mu_a[i];
      mix_b += w[i] * mu_b[i];
      cross += w[i] * mu_a[i] * mu_b[i];
    }
    g += cross - mix_a * mix_b;
  }
  return g;
}

// One outer contribution to the leading term at outer assignment pa.
double leading_contribution(const McContext& mc, const FactorAssignment& pa, RngStream& rng) {
  const double wa = mc.ctx.mass(pa);
  std::vector<double> w, mu_a, mu_b, base;
  for (std::size_t c = 0; c < mc.ctx.post.size(); ++c) {
    if (!mc.ctx.model.grid().matches(c, pa)) continue;
    const double wc = mc.ctx.post.weight(c) / wa;
    if (!(wc > 0.0)) continue;
    w.push_back(wc);
    double b_est;
    if (mc.ctx.shape.param_manifest) {
      b_est = mc.cell_within_est(c, rng);
    } else if (mc.closed) {
      b_est = mc.ctx.cells[c].variance();
    } else {
      b_est = mc.cell_within_est(c, rng) + mc.cell_between_est(c, rng);
    }
    base.push_back(b_est);
    double a, b;
    mc.cell_mean_halves(c, rng, a, b);
    mu_a.push_back(a);
    mu_b.push_back(b);
  }

  double g = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) g += w[i] * base[i];
  if (mc.closed) {
    double mbar = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mbar += w[i] * mu_a[i];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = mu_a[i] - mbar;
      g += w[i] * d * d;
    }
  } else {
    double mix_a = 0.0, mix_b = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mix_a += w[i] * mu_a[i];
      mix_b += w[i] * mu_b[i];
      cross += w[i] * mu_a[i] * mu_b[i];
    }
    g += cross - mix_a * mix_b;
  }
  return g;
}

// Cumulative weights of the marginal over `S` for outer sampling, plus the
// level tuples behind each CDF slot.
struct OuterSampler {
  SubsetGrid grid;
  std::vector<double> cdf;

  OuterSampler(const EngineContext& ctx, const std::vector<std::size_t>& S)
      : grid(ctx.model, S) {
    cdf.resize(grid.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      FactorAssignment p(ctx.model.discrete_factor_count());
      grid.bind(i, p);
      acc += ctx.mass(p);
      cdf[i] = acc;
    }
  }

  FactorAssignment draw(const EngineContext& ctx, RngStream& rng) const {
    FactorAssignment p(ctx.model.discrete_factor_count());
    grid.bind(rng.categorical_from_cdf(cdf), p);
    return p;
  }
};

}  // namespace

DecompositionResult decompose_mc(const HierarchicalModel& model, const Dataset& data,
                                 const PosteriorTable& posterior,
                                 const DecompositionPlan& plan, McBudget budget,
                                 std::uint64_t seed) {
  if (budget.outer < 2)
    throw ValidationError("decompose_mc: need at least 2 outer samples");
  if (budget.inner < 2)
    throw ValidationError("decompose_mc: need at least 2 inner draws per variance estimate");

  const auto cells = fit_all_cells(model, data);
  EngineContext ctx{model, cells, posterior, analyze_plan(model, plan)};
  const McContext mc{ctx, data, budget, model.backend().closed_form()};

  DecompositionResult result;
  result.plan = plan;
  result.engine = Engine::kMonteCarlo;
  result.seed = seed;
  result.budget = budget;
  result.total =
      conditional_moments(model, cells, posterior,
                          FactorAssignment(model.discrete_factor_count()))
          .variance;

  const auto labels = term_labels(plan);
  const std::size_t m = plan.blocks.size();

  for (std::size_t t = 0; t < labels.size(); ++t) {
    std::vector<double> contrib(budget.outer);
    if (labels[t].leading) {
      const OuterSampler outer(ctx, union_through(ctx.shape.dblocks, m));
      parallel_for(budget.outer, [&](std::size_t i) {
        RngStream rng = RngStream::derive(seed, t, i);
        const FactorAssignment pa = outer.draw(ctx, rng);
        contrib[i] = leading_contribution(mc, pa, rng);
      });
    } else {
      const std::size_t j = labels[t].var_block;
      const bool with_param = ctx.shape.param_manifest && (j + 1 == m);
      const OuterSampler outer(ctx, union_through(ctx.shape.dblocks, j));
      const SubsetGrid bgrid(model, ctx.shape.dblocks[j]);
      parallel_for(budget.outer, [&](std::size_t i) {
        RngStream rng = RngStream::derive(seed, t, i);
        const FactorAssignment pc = outer.draw(ctx, rng);
        contrib[i] = var_term_contribution(mc, pc, bgrid, with_param, rng);
      });
    }
    TermEstimate est;
    est.label = labels[t];
    est.engine = Engine::kMonteCarlo;
    est.value = pairwise_mean(contrib);
    est.std_error = std::sqrt(sample_variance(contrib) / static_cast<double>(budget.outer));
    result.terms.push_back(std::move(est));
  }

  result.residual = result.total - result.term_sum();
  double se2 = 0.0;
  for (const auto& term : result.terms) se2 += term.std_error * term.std_error;
  result.residual_se = std::sqrt(se2);
  return result;
}

DropTermReport drop_term_report(const DecompositionResult& result, double threshold) {
  DropTermReport report;
  report.threshold = threshold;
  const auto props = result.proportions();
  for (std::size_t t = 0; t < result.terms.size(); ++t) {
    if (!(props[t] < threshold)) continue;
    DropTermEntry entry;
    entry.label = result.terms[t].label.text;
    entry.value = result.terms[t].value;
    entry.proportion = props[t];

    const bool trailing = !result.terms[t].label.leading && result.terms[t].label.var_block == 0;
    if (trailing) {
      entry.suggests_removal = true;
      entry.removable_factors = result.plan.blocks.front();
      std::string fixed;
      for (std::size_t k : entry.removable_factors) {
        if (!fixed.empty()) fixed += ",";
        fixed += "V" + std::to_string(k + 1);
      }
      if (result.plan.block_count() == 1) {
        entry.reduced_expression = "Var(Y|D) with " + fixed + " fixed (no decomposition remains)";
      } else {
        DecompositionPlan reduced;
        reduced.factor_count = result.plan.factor_count;
        reduced.blocks.assign(result.plan.blocks.begin() + 1, result.plan.blocks.end());
        reduced.latent = result.plan.latent;
        reduced.latent.insert(reduced.latent.end(), result.plan.blocks.front().begin(),
                              result.plan.blocks.front().end());
        std::sort(reduced.latent.begin(), reduced.latent.end());
        std::string expr;
        for (const auto& label : term_labels(reduced)) {
          if (!expr.empty()) expr += " + ";
          expr += label.text;
        }
        entry.reduced_expression = expr + "  (with " + fixed + " fixed)";
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ppv
