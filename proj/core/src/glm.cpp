#include "ppv/glm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ppv/parallel.hpp"

namespace ppv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kProbClamp = 1e-15;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;

double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

}  // namespace

Link link_from_label(const std::string& label) {
  if (label == "L" || label == "logit") return Link::kLogit;
  if (label == "C" || label == "cloglog") return Link::kCloglog;
  if (label == "P" || label == "probit") return Link::kProbit;
  throw ValidationError("unknown link '" + label + "' (expected L/logit, C/cloglog, P/probit)");
}

std::string link_name(Link link) {
  switch (link) {
    case Link::kLogit: return "logit";
    case Link::kCloglog: return "cloglog";
    case Link::kProbit: return "probit";
  }
  return "?";
}

double inverse_link(Link link, double eta) {
  double p = 0.0;
  switch (link) {
    case Link::kLogit: p = 1.0 / (1.0 + std::exp(-eta)); break;
    case Link::kCloglog: p = -std::expm1(-std::exp(eta)); break;
    case Link::kProbit: p = std_normal_cdf(eta); break;
  }
  return clamp_prob(p);
}

double inverse_link_deriv(Link link, double eta) {
  switch (link) {
    case Link::kLogit: {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      return p * (1.0 - p);
    }
    case Link::kCloglog: return std::exp(eta - std::exp(eta));
    case Link::kProbit: return std_normal_pdf(eta);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Spec construction

namespace {

struct BuiltColumn {
  ColumnTransform transform;
  Eigen::VectorXd values;  // standardized
};

BuiltColumn build_column(const std::string& name, const Dataset& data,
                         const DerivedSquares& derived) {
  const std::size_t n = data.n();
  Eigen::VectorXd raw(n);
  ColumnTransform tr;
  tr.name = name;

  auto derived_it = derived.find(name);
  if (derived_it != derived.end() && !data.has_covariate(name)) {
    const auto& source = data.covariate(derived_it->second);
    double c = 0.0;
    for (double v : source) c += v;
    c /= static_cast<double>(n);
    tr.square_of = derived_it->second;
    tr.source_center = c;
    for (std::size_t i = 0; i < n; ++i) raw[static_cast<Eigen::Index>(i)] = (source[i] - c) * (source[i] - c);
  } else {
    const auto& col = data.covariate(name);
    for (std::size_t i = 0; i < n; ++i) raw[static_cast<Eigen::Index>(i)] = col[i];
  }

  tr.center = raw.mean();
  const double sd = n > 1 ? std::sqrt((raw.array() - tr.center).square().sum() /
                                      static_cast<double>(n - 1))
                          : 0.0;
  if (!(sd > 0.0))
    throw ValidationError("covariate '" + name + "' is constant on the training data");
  tr.scale = sd;

  BuiltColumn out;
  out.values = (raw.array() - tr.center) / tr.scale;
  out.transform = tr;
  return out;
}

}  // namespace

GlmModelSpec make_glm_spec(Link link, const std::vector<std::string>& covariate_subset,
                           int trials, double prior_sd, const Dataset& data,
                           const DerivedSquares& derived) {
  if (trials < 1) throw ValidationError("glm-binomial: trials must be >= 1");
  if (!(prior_sd > 0.0)) throw ValidationError("glm-binomial: prior sd must be > 0");
  if (data.n() == 0) throw ValidationError("glm-binomial: empty dataset");

  GlmModelSpec spec;
  spec.link = link;
  spec.trials = trials;
  spec.prior_sd = prior_sd;

  const std::size_t n = data.n();
  spec.response.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double y = data.responses()[i];
    if (y < 0.0 || y > static_cast<double>(trials) || y != std::floor(y))
      throw ValidationError("glm-binomial: response " + std::to_string(y) +
                            " is not a count in [0, " + std::to_string(trials) + "]");
    spec.response[static_cast<Eigen::Index>(i)] = y;
    spec.log_choose_sum += log_choose(static_cast<double>(trials), y);
  }

  spec.design.resize(static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(covariate_subset.size() + 1));
  spec.design.col(0).setOnes();
  for (std::size_t j = 0; j < covariate_subset.size(); ++j) {
    auto built = build_column(covariate_subset[j], data, derived);
    spec.design.col(static_cast<Eigen::Index>(j + 1)) = built.values;
    spec.transforms.push_back(std::move(built.transform));
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(spec.design);
  lu.setThreshold(1e-10);
  if (lu.rank() < spec.design.cols())
    throw ValidationError("glm-binomial: design matrix is rank deficient for subset");
  return spec;
}

Eigen::VectorXd design_row_at(const GlmModelSpec& spec,
                              const std::map<std::string, double>& x_new) {
  Eigen::VectorXd row(spec.design.cols());
  row[0] = 1.0;
  for (std::size_t j = 0; j < spec.transforms.size(); ++j) {
    const auto& tr = spec.transforms[j];
    double raw;
    if (tr.square_of) {
      auto it = x_new.find(*tr.square_of);
      if (it == x_new.end())
        throw ValidationError("x_new is missing covariate '" + *tr.square_of +
                              "' needed to build '" + tr.name + "'");
      const double centered = it->second - tr.source_center;
      raw = centered * centered;
    } else {
      auto it = x_new.find(tr.name);
      if (it == x_new.end())
        throw ValidationError("x_new is missing covariate '" + tr.name + "'");
      raw = it->second;
    }
    row[static_cast<Eigen::Index>(j + 1)] = (raw - tr.center) / tr.scale;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Log posterior with analytic derivatives

namespace {

struct ObservationDerivs {
  double ll;  // y log p + (m - y) log(1 - p)
  double d1;  // d ll / d eta
  double d2;  // d^2 ll / d eta^2
};

// Cancellation-free per-link forms: the generic (y - mp) / (p (1 - p)) route
// loses 1 - p catastrophically once p sits near 1.
ObservationDerivs binomial_eta_derivs(Link link, double eta, double y, double m) {
  switch (link) {
    case Link::kLogit: {
      const double log1pe =
          eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double q = 1.0 / (1.0 + std::exp(eta));  // 1 - p, computed directly
      return {y * eta - m * log1pe, y - m * p, -m * p * q};
    }
    case Link::kCloglog: {
      // log(1 - p) = -w with w = e^eta; log p via expm1
      const double w = std::exp(std::min(eta, 690.0));
      const double p = -std::expm1(-w);
      const double log_p = std::log(std::max(p, 1e-300));
      const double g = w * std::exp(-w) / std::max(p, 1e-300);  // d log p / d eta
      return {y * log_p - (m - y) * w,
              y * g - (m - y) * w,
              y * g * (1.0 - w - g) - (m - y) * w};
    }
    case Link::kProbit: {
      // Phi and 1 - Phi each via their own erfc evaluation: no subtraction
      const double cdf_lo = std::max(0.5 * std::erfc(-eta * 0.70710678118654752440), 1e-300);
      const double cdf_hi = std::max(0.5 * std::erfc(eta * 0.70710678118654752440), 1e-300);
      const double pdf = std_normal_pdf(eta);
      const double r1 = pdf / cdf_lo;  // phi / Phi
      const double r2 = pdf / cdf_hi;  // phi / (1 - Phi)
      return {y * std::log(cdf_lo) + (m - y) * std::log(cdf_hi),
              y * r1 - (m - y) * r2,
              -y * r1 * (eta + r1) - (m - y) * r2 * (r2 - eta)};
    }
  }
  return {0.0, 0.0, 0.0};
}

double binomial_eta_ll(Link link, double eta, double y, double m) {
  switch (link) {
    case Link::kLogit: {
      const double log1pe =
          eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
      return y * eta - m * log1pe;
    }
    case Link::kCloglog: {
      const double w = std::exp(std::min(eta, 690.0));
      return y * std::log(std::max(-std::expm1(-w), 1e-300)) - (m - y) * w;
    }
    case Link::kProbit: {
      const double cdf_lo = std::max(0.5 * std::erfc(-eta * 0.70710678118654752440), 1e-300);
      const double cdf_hi = std::max(0.5 * std::erfc(eta * 0.70710678118654752440), 1e-300);
      return y * std::log(cdf_lo) + (m - y) * std::log(cdf_hi);
    }
  }
  return 0.0;
}

}  // namespace

double log_posterior_value(const GlmModelSpec& spec, const Eigen::VectorXd& beta) {
  if (beta.size() != spec.design.cols())
    throw ValidationError("beta dimension does not match the design");
  const double m = static_cast<double>(spec.trials);
  const Eigen::VectorXd eta = spec.design * beta;
  double ll = spec.log_choose_sum;
  for (Eigen::Index i = 0; i < spec.design.rows(); ++i) {
    ll += binomial_eta_ll(spec.link, eta[i], spec.response[i], m);
  }
  const double sd2 = spec.prior_sd * spec.prior_sd;
  ll += -0.5 * beta.squaredNorm() / sd2 -
        static_cast<double>(beta.size()) * (0.5 * kLog2Pi + std::log(spec.prior_sd));
  return ll;
}

LogPosterior log_posterior(const GlmModelSpec& spec, const Eigen::VectorXd& beta) {
  if (beta.size() != spec.design.cols())
    throw ValidationError("beta dimension does not match the design");

  const Eigen::Index n = spec.design.rows();
  const double m = static_cast<double>(spec.trials);

  LogPosterior out;
  out.gradient = Eigen::VectorXd::Zero(beta.size());
  out.hessian = Eigen::MatrixXd::Zero(beta.size(), beta.size());

  const Eigen::VectorXd eta = spec.design * beta;
  double ll = spec.log_choose_sum;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = spec.response[i];
    const auto obs = binomial_eta_derivs(spec.link, eta[i], y, m);
    ll += obs.ll;
    out.gradient += obs.d1 * spec.design.row(i).transpose();
    out.hessian += obs.d2 * spec.design.row(i).transpose() * spec.design.row(i);
  }

  const double sd2 = spec.prior_sd * spec.prior_sd;
  ll += -0.5 * beta.squaredNorm() / sd2 -
        static_cast<double>(beta.size()) * (0.5 * kLog2Pi + std::log(spec.prior_sd));
  out.gradient -= beta / sd2;
  out.hessian -= Eigen::MatrixXd::Identity(beta.size(), beta.size()) / sd2;
  out.value = ll;
  return out;
}

// ---------------------------------------------------------------------------
// Laplace approximation

namespace {
std::string grad_norm_string(const LogPosterior& lp) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", lp.gradient.norm());
  return buf;
}
}  // namespace

LaplaceFit laplace_fit(const GlmModelSpec& spec) {
  const Eigen::Index d = spec.design.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  LogPosterior lp = log_posterior(spec, beta);

  constexpr int kMaxIter = 100;
  constexpr double kGradTol = 1e-8;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    if (lp.gradient.lpNorm<Eigen::Infinity>() < kGradTol) break;

    Eigen::MatrixXd neg_h = -lp.hessian;
    Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
    double ridge = 1e-8;
    while (llt.info() != Eigen::Success && ridge < 1e8) {
      neg_h = -lp.hessian + ridge * Eigen::MatrixXd::Identity(d, d);
      llt.compute(neg_h);
      ridge *= 10.0;
    }
    if (llt.info() != Eigen::Success)
      throw ConvergenceError("Newton step failed: Hessian could not be stabilized");

    const Eigen::VectorXd step = llt.solve(lp.gradient);
    // accept any step that does not lose more than rounding noise; near the
    // mode the full Newton step may change the value by less than one ulp
    const double slack = 1e-12 * (1.0 + std::fabs(lp.value));
    double t = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Eigen::VectorXd candidate = beta + t * step;
      const LogPosterior lp_new = log_posterior(spec, candidate);
      if (std::isfinite(lp_new.value) && lp_new.value >= lp.value - slack) {
        beta = candidate;
        lp = lp_new;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved)
      throw ConvergenceError("Newton with step halving stalled; |grad| = " +
                             grad_norm_string(lp));
  }
  if (lp.gradient.lpNorm<Eigen::Infinity>() >= kGradTol)
    throw ConvergenceError("Newton did not converge in 100 steps; final |grad| = " +
                           grad_norm_string(lp));

  LaplaceFit fit;
  fit.mode = beta;
  fit.neg_hessian = -lp.hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(fit.neg_hessian);
  if (llt.info() != Eigen::Success)
    throw ConvergenceError("mode is a saddle: -Hessian is not positive definite");

  double half_log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) half_log_det += std::log(llt.matrixL()(i, i));

  // log m(D) ~ l(beta_hat) + (d/2) log 2 pi - (1/2) log det(-H);
  // l already includes the prior density.
  fit.log_marginal = lp.value + 0.5 * static_cast<double>(d) * kLog2Pi - half_log_det;
  return fit;
}

double laplace_log_marginal(const GlmModelSpec& spec) { return laplace_fit(spec).log_marginal; }

// ---------------------------------------------------------------------------
// Random walk Metropolis

PosteriorDraws rw_metropolis(const GlmModelSpec& spec, std::size_t chain_length,
                             std::size_t burn_in, double step_scale, std::uint64_t seed) {
  if (chain_length == 0) throw ValidationError("rw_metropolis: chain_length must be > 0");
  const auto fit = laplace_fit(spec);
  const Eigen::Index d = spec.design.cols();
  if (!(step_scale > 0.0)) step_scale = 2.38 / std::sqrt(static_cast<double>(d));

  // proposal covariance = step_scale^2 (-H)^-1, applied through the Cholesky
  // factor of the inverse
  const Eigen::MatrixXd cov = step_scale * step_scale *
      fit.neg_hessian.llt().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

  RngStream rng = RngStream::derive(seed, 0x52574DULL);  // "RWM"
  Eigen::VectorXd current = fit.mode;
  double current_lp = log_posterior_value(spec, current);

  PosteriorDraws out;
  out.seed = seed;
  out.draws.reserve(chain_length);
  std::size_t accepted = 0;
  const std::size_t total = burn_in + chain_length;
  Eigen::VectorXd z(d);
  for (std::size_t t = 0; t < total; ++t) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    const Eigen::VectorXd proposal = current + chol * z;
    const double proposal_lp = log_posterior_value(spec, proposal);
    if (std::log(std::max(rng.uniform(), 1e-300)) < proposal_lp - current_lp) {
      current = proposal;
      current_lp = proposal_lp;
      ++accepted;
    }
    if (t >= burn_in) out.draws.push_back(current);
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
  if (out.acceptance_rate < 0.05 || out.acceptance_rate > 0.95)
    out.warning = "acceptance rate " + std::to_string(out.acceptance_rate) +
                  " outside [0.05, 0.95]; consider adjusting step_scale";
  return out;
}

// ---------------------------------------------------------------------------
// Predictive moments

PredictiveMoments predictive_moments_at(const GlmModelSpec& spec, const PosteriorDraws& draws,
                                        const std::map<std::string, double>& x_new,
                                        GlmTarget target) {
  if (draws.draws.empty()) throw ValidationError("predictive_moments_at: no draws");
  const Eigen::VectorXd x = design_row_at(spec, x_new);
  const std::size_t t = draws.draws.size();
  const double m = static_cast<double>(spec.trials);

  std::vector<double> p(t), within(t);
  for (std::size_t i = 0; i < t; ++i) {
    p[i] = inverse_link(spec.link, x.dot(draws.draws[i]));
    within[i] = m * p[i] * (1.0 - p[i]);
  }
  const double p_mean = pairwise_mean(p);
  const double p_var = sample_variance(p);

  if (target == GlmTarget::kProbability) return {p_mean, p_var};
  return {m * p_mean, pairwise_mean(within) + m * m * p_var};
}

// ---------------------------------------------------------------------------
// Grid backend

std::vector<std::string> parse_subset_label(const std::string& label) {
  if (label.empty() || label == "none") return {};
  std::vector<std::string> names;
  std::string cur;
  for (char c : label) {
    if (c == '+') {
      if (cur.empty()) throw ValidationError("empty covariate name in subset '" + label + "'");
      names.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (cur.empty()) throw ValidationError("empty covariate name in subset '" + label + "'");
  names.push_back(cur);
  return names;
}

GlmBackend::GlmBackend(std::vector<FactorSpec> factors, GlmGridConfig config)
    : factors_(std::move(factors)), config_(std::move(config)) {
  std::vector<std::size_t> sizes;
  for (const auto& f : factors_) sizes.push_back(f.level_count());
  grid_ = FactorGrid(sizes);
  if (config_.link_factor && *config_.link_factor >= factors_.size())
    throw ValidationError("glm backend: link factor index out of range");
  if (config_.subset_factor && *config_.subset_factor >= factors_.size())
    throw ValidationError("glm backend: subset factor index out of range");
  if (config_.link_factor) {
    for (const auto& label : factors_[*config_.link_factor].levels)
      (void)link_from_label(label);  // validate eagerly
  }
}

GlmModelSpec GlmBackend::spec_for_cell(std::size_t cell, const Dataset& data) const {
  const auto levels = grid_.levels_of(cell);
  Link link = config_.fixed_link;
  if (config_.link_factor) {
    const auto& f = factors_[*config_.link_factor];
    link = link_from_label(f.levels[static_cast<std::size_t>(levels[*config_.link_factor])]);
  }
  std::vector<std::string> subset = config_.fixed_covariates;
  if (config_.subset_factor) {
    const auto& f = factors_[*config_.subset_factor];
    subset = parse_subset_label(
        f.levels[static_cast<std::size_t>(levels[*config_.subset_factor])]);
  }
  return make_glm_spec(link, subset, config_.trials, config_.prior_sd, data, config_.derived);
}

GlmBackend::CellFit GlmBackend::fit_cell_full(std::size_t cell, const Dataset& data) const {
  GlmModelSpec spec;
  try {
    spec = spec_for_cell(cell, data);
  } catch (const std::exception& e) {
    throw BackendError("glm cell " + std::to_string(cell) + ": " + e.what());
  }

  CellFit out;
  try {
    const auto laplace = laplace_fit(spec);
    const auto draws = rw_metropolis(spec, config_.chain_length, config_.burn_in,
                                     config_.step_scale,
                                     RngStream::derive(config_.seed, 0x61ULL, cell).next_u64());
    const Eigen::VectorXd x = design_row_at(spec, config_.x_new);
    const double m = static_cast<double>(spec.trials);

    out.mean_draws.resize(draws.draws.size());
    out.var_draws.resize(draws.draws.size());
    for (std::size_t i = 0; i < draws.draws.size(); ++i) {
      const double p = inverse_link(spec.link, x.dot(draws.draws[i]));
      if (config_.target == GlmTarget::kCount) {
        out.mean_draws[i] = m * p;
        out.var_draws[i] = m * p * (1.0 - p);
      } else {
        out.mean_draws[i] = p;
        out.var_draws[i] = 0.0;  // the probability is a deterministic function of beta
      }
    }
    out.summary.log_marginal = laplace.log_marginal;
    out.summary.mean = pairwise_mean(out.mean_draws);
    out.summary.within_var = pairwise_mean(out.var_draws);
    out.summary.between_var = sample_variance(out.mean_draws);
  } catch (const std::exception& e) {
    throw BackendError("glm cell " + std::to_string(cell) + " failed to fit: " + e.what());
  }
  return out;
}

ComponentSummary GlmBackend::fit(std::size_t cell, const Dataset& data) const {
  return fit_cell_full(cell, data).summary;
}

double GlmBackend::sample_conditional_mean(std::size_t, const Dataset&, RngStream&) const {
  throw BackendError("glm backend: materialize() the model before Monte Carlo sampling");
}

double GlmBackend::sample_conditional_var(std::size_t, const Dataset&, RngStream&) const {
  throw BackendError("glm backend: materialize() the model before Monte Carlo sampling");
}

// ---------------------------------------------------------------------------
// Precomputed backend and materialization

PrecomputedBackend::PrecomputedBackend(std::vector<ComponentSummary> summaries,
                                       std::vector<std::vector<double>> mean_draws,
                                       std::vector<std::vector<double>> var_draws,
                                       bool has_parameter, std::size_t fitted_n,
                                       std::string family)
    : summaries_(std::move(summaries)),
      mean_draws_(std::move(mean_draws)),
      var_draws_(std::move(var_draws)),
      has_parameter_(has_parameter),
      fitted_n_(fitted_n),
      family_(std::move(family)) {
  if (!mean_draws_.empty() &&
      (mean_draws_.size() != summaries_.size() || var_draws_.size() != summaries_.size()))
    throw ValidationError("precomputed backend: draw tables do not match the summary count");
}

ComponentSummary PrecomputedBackend::fit(std::size_t cell, const Dataset& data) const {
  if (data.n() != fitted_n_)
    throw BackendError("precomputed backend was fitted on n=" + std::to_string(fitted_n_) +
                       " but is being queried with n=" + std::to_string(data.n()));
  return summaries_.at(cell);
}

double PrecomputedBackend::sample_conditional_mean(std::size_t cell, const Dataset&,
                                                   RngStream& rng) const {
  if (mean_draws_.empty()) return summaries_.at(cell).mean;
  const auto& draws = mean_draws_.at(cell);
  return draws[rng.uniform_index(draws.size())];
}

double PrecomputedBackend::sample_conditional_var(std::size_t cell, const Dataset&,
                                                  RngStream& rng) const {
  if (var_draws_.empty()) return summaries_.at(cell).variance();
  const auto& draws = var_draws_.at(cell);
  return draws[rng.uniform_index(draws.size())];
}

HierarchicalModel materialize(const HierarchicalModel& model, const Dataset& data) {
  const auto* glm = dynamic_cast<const GlmBackend*>(&model.backend());
  if (glm == nullptr) return model;

  const std::size_t n = model.grid().size();
  std::vector<ComponentSummary> summaries(n);
  std::vector<std::vector<double>> means(n), vars(n);
  parallel_for(n, [&](std::size_t c) {
    auto fit = glm->fit_cell_full(c, data);
    summaries[c] = fit.summary;
    means[c] = std::move(fit.mean_draws);
    vars[c] = std::move(fit.var_draws);
  });

  auto precomputed = std::make_shared<PrecomputedBackend>(
      std::move(summaries), std::move(means), std::move(vars), glm->has_parameter(),
      data.n(), "glm-binomial");
  return HierarchicalModel(
      model.factors(), precomputed,
      model.has_parameter_factor() ? std::optional<std::string>(model.parameter_factor_name())
                                   : std::nullopt);
}

}  // namespace ppv
