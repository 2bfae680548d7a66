// ppv: decompose posterior predictive variances from the command line.
//
// Subcommands: enumerate, decompose, example, sweep.  Every run writes a
// manifest.json next to its outputs.  Exit codes: 0 success, 1 invariant or
// conservation failure, 2 usage/parse error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "ppv/conjugate.hpp"
#include "ppv/experiments.hpp"
#include "ppv/model_io.hpp"
#include "ppv/report_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ppv;

namespace {

constexpr std::uint64_t kDefaultSeed = 1729;

struct OutputWriter {
  fs::path dir;
  RunManifest manifest;

  explicit OutputWriter(const std::string& out_dir, std::string command) {
    dir = out_dir;
    fs::create_directories(dir);
    manifest.command = std::move(command);
    manifest.started = manifest_now();
  }

  void emit(const std::string& name, const std::string& content) {
    const fs::path path = dir / name;
    write_file(path.string(), content);
    manifest.outputs.push_back(path.string());
  }

  void finish() {
    const fs::path path = dir / "manifest.json";
    write_file(path.string(), manifest_to_json(manifest).dump(2) + "\n");
  }
};

McBudget parse_budget(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos)
    throw ParseError("budget must look like OUTERxINNER, e.g. 4096x1024");
  try {
    return {std::stoull(text.substr(0, x)), std::stoull(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw ParseError("budget must look like OUTERxINNER, e.g. 4096x1024");
  }
}

void print_result(const DecompositionResult& result) {
  const auto props = result.proportions();
  for (std::size_t t = 0; t < result.terms.size(); ++t) {
    std::cout << "  " << result.terms[t].label.text << " = "
              << format_double(result.terms[t].value);
    if (result.engine == Engine::kMonteCarlo)
      std::cout << " (se " << format_double(result.terms[t].std_error) << ")";
    std::cout << "  [" << format_double(props[t]) << " of total]\n";
  }
  std::cout << "  total = " << format_double(result.total)
            << ", residual = " << format_double(result.residual) << "\n";
}

int finish_decomposition(OutputWriter& out, const DecompositionResult& result,
                         const std::string& stem) {
  out.emit(stem + ".csv", result_to_csv(result));
  out.emit(stem + ".json", result_to_json(result).dump(2) + "\n");
  out.finish();
  print_result(result);
  if (!result.conservation_ok()) {
    std::cerr << "conservation violated: residual " << format_double(result.residual)
              << " exceeds tolerance\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------

int run_enumerate(std::size_t k, const std::string& format, const std::string& out_dir) {
  const auto plans = enumerate_plans(k);
  OutputWriter out(out_dir, "enumerate");
  out.manifest.config = {{"k", k}, {"format", format}};
  out.manifest.seed = 0;

  if (format == "json") {
    json jplans = json::array();
    for (const auto& p : plans) {
      json blocks = json::array();
      for (const auto& b : p.blocks) {
        json block = json::array();
        for (std::size_t f : b) block.push_back(f + 1);
        blocks.push_back(block);
      }
      json latent = json::array();
      for (std::size_t f : p.latent) latent.push_back(f + 1);
      jplans.push_back({{"text", format_plan(p)}, {"blocks", blocks}, {"latent", latent}});
    }
    const json doc = {{"k", k}, {"count", plans.size()}, {"plans", jplans}};
    std::cout << doc.dump(2) << "\n";
    out.emit("plans.json", doc.dump(2) + "\n");
  } else {
    std::string csv = "plan,latent\n";
    for (const auto& p : plans) {
      std::string latent;
      for (std::size_t f : p.latent) {
        if (!latent.empty()) latent += ",";
        latent += std::to_string(f + 1);
      }
      csv += csv_escape(format_plan(p)) + "," + csv_escape(latent) + "\n";
    }
    std::cout << plans.size() << "\n";
    for (const auto& p : plans) std::cout << format_plan(p) << "\n";
    out.emit("plans.csv", csv);
  }
  out.finish();
  return 0;
}

int run_decompose(const std::string& model_file, const std::string& data_file,
                  const std::string& plan_text, const std::string& engine,
                  std::uint64_t seed, const std::string& budget_text,
                  const std::string& out_dir) {
  const auto model_spec = load_model_spec_file(model_file);
  const Dataset data = data_file.empty() ? Dataset({}, {}) : load_dataset_csv_file(data_file);
  const auto plan = parse_plan(plan_text, model_spec.factor_count());

  const HierarchicalModel model = materialize(model_spec, data);
  const auto posterior = joint_posterior(model, data);

  OutputWriter out(out_dir, "decompose");
  out.manifest.seed = seed;
  out.manifest.config = {{"model", model_file},
                         {"data", data_file},
                         {"plan", plan_text},
                         {"engine", engine},
                         {"budget", budget_text}};

  DecompositionResult result;
  if (engine == "mc") {
    result = decompose_mc(model, data, posterior, plan, parse_budget(budget_text), seed);
  } else {
    result = decompose_exact(model, data, posterior, plan);
    result.seed = seed;
  }
  return finish_decomposition(out, result, "result");
}

int run_example_normal_normal(double sigma, double tau0, std::size_t n,
                              const std::string& engine, const std::string& budget_text,
                              std::uint64_t seed, const std::string& out_dir) {
  auto [model, data] = normal_normal_example(sigma, tau0, n);
  const auto posterior = joint_posterior(model, data);
  OutputWriter out(out_dir, "example normal-normal");
  out.manifest.seed = seed;
  out.manifest.config = {{"sigma", sigma}, {"tau0", tau0}, {"n", n}, {"engine", engine}};

  DecompositionResult result;
  const DecompositionPlan plan{{{0}}, {}, 1};
  if (engine == "mc") {
    result = decompose_mc(model, data, posterior, plan, parse_budget(budget_text), seed);
  } else {
    result = decompose_exact(model, data, posterior, plan);
    result.seed = seed;
  }
  return finish_decomposition(out, result, "result");
}

int run_example_beta_binomial(int m, double a, double b, const std::string& out_dir) {
  auto [model, data] = beta_binomial_example(m, a, b);
  const auto posterior = joint_posterior(model, data);
  const auto result = decompose_exact(model, data, posterior, DecompositionPlan{{{0}}, {}, 1});
  const auto split = beta_binomial_decomposition({m, a, b});

  OutputWriter out(out_dir, "example beta-binomial");
  out.manifest.seed = 0;
  out.manifest.config = {{"m", m}, {"a", a}, {"b", b}};
  out.emit("result.csv", result_to_csv(result));
  auto j = result_to_json(result);
  j["var_e_dominates"] = split.var_e_dominates;
  out.emit("result.json", j.dump(2) + "\n");
  out.finish();

  print_result(result);
  std::cout << "  Var-E term " << (split.var_e_dominates ? "dominates" : "does not dominate")
            << "\n";
  return result.conservation_ok() ? 0 : 1;
}

int run_example_challenger(const ChallengerConfig& config, const std::string& out_dir) {
  const auto report = run_challenger(config);

  OutputWriter out(out_dir, "example challenger");
  out.manifest.seed = config.seed;
  out.manifest.config = {{"t_new", config.t_new},       {"s_new", config.s_new},
                         {"prior_sd", config.prior_sd}, {"chain_length", config.chain_length},
                         {"burn_in", config.burn_in}};

  out.emit("three_term.csv", result_to_csv(report.three_term));
  out.emit("three_term.json", result_to_json(report.three_term).dump(2) + "\n");
  out.emit("restricted_two_term.csv", result_to_csv(report.restricted_two_term));
  out.emit("restricted_two_term.json",
           result_to_json(report.restricted_two_term).dump(2) + "\n");

  std::string table = "model,link,subset,log_marginal,weight,mean,variance\n";
  for (const auto& row : report.model_table) {
    table += "m" + std::to_string(row.index) + "," + row.link + "," + csv_escape(row.subset) +
             "," + format_double(row.log_marginal) + "," + format_double(row.weight) + "," +
             format_double(row.mean) + "," + format_double(row.variance) + "\n";
  }
  out.emit("model_table.csv", table);

  std::string importance = "subset,posterior_probability\n";
  for (const auto& [label, p] : report.subset_importance)
    importance += csv_escape(label) + "," + format_double(p) + "\n";
  out.emit("subset_importance.csv", importance);

  json drop = json::array();
  for (const auto& e : report.drop_report.entries) {
    drop.push_back({{"label", e.label},
                    {"value", e.value},
                    {"proportion", e.proportion},
                    {"suggests_removal", e.suggests_removal},
                    {"reduced_expression", e.reduced_expression}});
  }
  out.emit("drop_report.json",
           json{{"threshold", report.drop_report.threshold}, {"entries", drop}}.dump(2) + "\n");
  out.finish();

  std::cout << "three-term decomposition (24 models):\n";
  print_result(report.three_term);
  std::cout << "restricted two-term decomposition (Draper's six models):\n";
  print_result(report.restricted_two_term);
  return report.three_term.conservation_ok() && report.restricted_two_term.conservation_ok()
             ? 0
             : 1;
}

int run_example_bma(std::size_t components, std::uint64_t seed, const std::string& out_dir) {
  auto [model, data] = make_random_bma(components, seed);
  const auto report = bma_equivalence_check(model, data);

  OutputWriter out(out_dir, "example bma-equivalence");
  out.manifest.seed = seed;
  out.manifest.config = {{"components", components}};
  out.emit("conditioned_on_model.csv", result_to_csv(report.conditioned_on_model));
  out.emit("conditioned_jointly.csv", result_to_csv(report.conditioned_jointly));
  out.emit("three_term.csv", result_to_csv(report.three_term));
  out.emit("equivalence.json",
           json{{"total_conditioned_on_model", report.conditioned_on_model.total},
                {"total_conditioned_jointly", report.conditioned_jointly.total},
                {"total_three_term", report.three_term.total},
                {"max_total_spread", report.max_total_spread}}
                   .dump(2) +
               "\n");
  out.finish();

  std::cout << "conditioned on the model index (parameters latent):\n";
  print_result(report.conditioned_on_model);
  std::cout << "conditioned on (model, parameter) jointly:\n";
  print_result(report.conditioned_jointly);
  std::cout << "three-term form:\n";
  print_result(report.three_term);
  std::cout << "  max spread between totals = " << format_double(report.max_total_spread)
            << "\n";

  const bool ok = report.max_total_spread <=
                      1e-10 * std::max(1.0, std::fabs(report.three_term.total)) &&
                  report.conditioned_on_model.conservation_ok() &&
                  report.conditioned_jointly.conservation_ok() &&
                  report.three_term.conservation_ok();
  return ok ? 0 : 1;
}

SweepConfig load_sweep_config(const std::string& path) {
  SweepConfig config;
  if (path.empty()) return config;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("sweep config: ") + e.what());
  }
  if (j.contains("n_grid")) config.n_grid = j["n_grid"].get<std::vector<std::size_t>>();
  if (j.contains("replicates")) config.replicates = j["replicates"].get<std::size_t>();
  if (j.contains("true_beta")) {
    const auto beta = j["true_beta"].get<std::vector<double>>();
    if (beta.size() != config.true_beta.size())
      throw ParseError("sweep config: true_beta must have " +
                       std::to_string(config.true_beta.size()) + " entries");
    std::copy(beta.begin(), beta.end(), config.true_beta.begin());
  }
  if (j.contains("trials")) config.trials = j["trials"].get<int>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("prior_sd")) config.prior_sd = j["prior_sd"].get<double>();
  if (j.contains("chain_length")) config.chain_length = j["chain_length"].get<std::size_t>();
  if (j.contains("burn_in")) config.burn_in = j["burn_in"].get<std::size_t>();
  return config;
}

int run_sweep_cmd(const std::string& config_file, std::optional<std::uint64_t> seed,
                  const std::string& out_dir) {
  SweepConfig config = load_sweep_config(config_file);
  if (seed) config.seed = *seed;
  config.validate();

  const auto result = run_sweep(config);

  OutputWriter out(out_dir, "sweep");
  out.manifest.seed = config.seed;
  json beta = json::array();
  for (double b : config.true_beta) beta.push_back(b);
  out.manifest.config = {{"n_grid", config.n_grid},
                         {"replicates", config.replicates},
                         {"true_beta", beta},
                         {"trials", config.trials},
                         {"prior_sd", config.prior_sd},
                         {"chain_length", config.chain_length},
                         {"burn_in", config.burn_in}};
  out.emit("sweep_rows.csv", sweep_rows_csv(result));
  out.emit("sweep_values.csv", sweep_values_csv(result));
  out.emit("sweep_proportions.csv", sweep_proportions_csv(result));
  out.finish();

  std::cout << "sweep finished: " << (result.attempted - result.failures) << "/"
            << result.attempted << " replicates succeeded\n";
  for (const auto& p : result.curves) {
    std::cout << "  n=" << p.n << " total=" << format_double(p.total) << " proportions=("
              << format_double(p.proportions[0]) << ", " << format_double(p.proportions[1])
              << ", " << format_double(p.proportions[2]) << ")\n";
  }
  const double failure_rate =
      static_cast<double>(result.failures) / static_cast<double>(result.attempted);
  if (failure_rate > 0.10) {
    std::cerr << "more than 10% of replicates failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posterior predictive variance decompositions"};
  app.require_subcommand(1);

  // enumerate ---------------------------------------------------------------
  auto* enumerate = app.add_subcommand("enumerate", "list every decomposition plan for K factors");
  std::size_t k = 2;
  std::string format = "csv";
  std::string out_dir = ".";
  enumerate->add_option("-k,--factors", k, "number of factors (1..6)")->required();
  enumerate->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  enumerate->add_option("--out", out_dir, "output directory");

  // decompose ---------------------------------------------------------------
  auto* decompose = app.add_subcommand("decompose", "decompose a model/data pair along a plan");
  std::string model_file, data_file, plan_text;
  std::string engine = "exact";
  std::string budget = "4096x1024";
  std::uint64_t seed = kDefaultSeed;
  std::string dec_out = ".";
  decompose->add_option("--model", model_file, "model spec JSON")->required();
  decompose->add_option("--data", data_file, "dataset CSV (omit for n=0)");
  decompose->add_option("--plan", plan_text, "plan text, e.g. \"1|2\"")->required();
  decompose->add_option("--engine", engine)->check(CLI::IsMember({"exact", "mc"}));
  decompose->add_option("--seed", seed, "RNG seed (default 1729)");
  decompose->add_option("--budget", budget, "Monte Carlo budget OUTERxINNER");
  decompose->add_option("--out", dec_out, "output directory");
  std::string dec_format = "csv";
  decompose->add_option("--format", dec_format)->check(CLI::IsMember({"csv", "json"}));

  // example -----------------------------------------------------------------
  auto* example = app.add_subcommand("example", "run a bundled analysis");
  std::string example_name;
  example
      ->add_option("name", example_name,
                   "one of: normal-normal, beta-binomial, challenger, bma-equivalence")
      ->required();
  double sigma = 1.0, tau0 = 1.0;
  std::size_t nn_n = 4;
  std::string ex_engine = "exact", ex_budget = "4096x1024";
  int bb_m = 30;
  double bb_a = 1.0, bb_b = 1.0;
  ChallengerConfig challenger;
  std::size_t components = 3;
  std::uint64_t ex_seed = kDefaultSeed;
  std::string ex_out = ".";
  example->add_option("--sigma", sigma, "normal-normal: likelihood sd");
  example->add_option("--tau0", tau0, "normal-normal: prior sd");
  example->add_option("--n", nn_n, "normal-normal: sample size");
  example->add_option("--engine", ex_engine)->check(CLI::IsMember({"exact", "mc"}));
  example->add_option("--budget", ex_budget, "Monte Carlo budget OUTERxINNER");
  example->add_option("--m", bb_m, "beta-binomial: trials");
  example->add_option("--a", bb_a, "beta-binomial: shape a");
  example->add_option("--b", bb_b, "beta-binomial: shape b");
  example->add_option("--chain", challenger.chain_length, "challenger: chain length");
  example->add_option("--burn-in", challenger.burn_in, "challenger: burn-in");
  example->add_option("--prior-sd", challenger.prior_sd, "challenger: coefficient prior sd");
  example->add_option("--t-new", challenger.t_new, "challenger: prediction temperature");
  example->add_option("--s-new", challenger.s_new, "challenger: prediction pressure");
  example->add_option("--components", components, "bma-equivalence: component count");
  example->add_option("--seed", ex_seed, "RNG seed (default 1729)");
  example->add_option("--out", ex_out, "output directory");

  // sweep ---------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "simulated binomial sample-size sweep");
  std::string sweep_config_file;
  std::string sweep_out = ".";
  std::optional<std::uint64_t> sweep_seed;
  sweep->add_option("--config", sweep_config_file, "sweep config JSON (defaults when omitted)");
  sweep->add_option("--seed", sweep_seed, "override the config seed");
  sweep->add_option("--out", sweep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*enumerate) return run_enumerate(k, format, out_dir);
    if (*decompose)
      return run_decompose(model_file, data_file, plan_text, engine, seed, budget, dec_out);
    if (*example) {
      if (example_name == "normal-normal")
        return run_example_normal_normal(sigma, tau0, nn_n, ex_engine, ex_budget, ex_seed,
                                         ex_out);
      if (example_name == "beta-binomial")
        return run_example_beta_binomial(bb_m, bb_a, bb_b, ex_out);
      if (example_name == "challenger") {
        challenger.seed = ex_seed;
        return run_example_challenger(challenger, ex_out);
      }
      if (example_name == "bma-equivalence")
        return run_example_bma(components, ex_seed, ex_out);
      std::cerr << "unknown example '" << example_name
                << "'; valid names: normal-normal, beta-binomial, challenger, "
                   "bma-equivalence\n";
      return 2;
    }
    if (*sweep) return run_sweep_cmd(sweep_config_file, sweep_seed, sweep_out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
