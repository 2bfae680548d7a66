#include "ppv/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ppv/conjugate.hpp"
#include "ppv/glm.hpp"

namespace ppv {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(const std::string& path, const std::string& why) {
  throw ParseError("model spec: " + path + ": " + why);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_at(path, "missing required field '" + key + "'");
  return *it;
}

double require_number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) fail_at(path + "." + key, "expected a number");
  return v.get<double>();
}

std::vector<FactorSpec> parse_factors(const json& spec, std::string& parameter_name,
                                      std::vector<std::size_t>& sizes) {
  const json& factors_json = require(spec, "factors", "$");
  if (!factors_json.is_array() || factors_json.empty())
    fail_at("$.factors", "expected a nonempty array");

  std::vector<FactorSpec> factors;
  for (std::size_t k = 0; k < factors_json.size(); ++k) {
    const std::string path = "$.factors[" + std::to_string(k) + "]";
    const json& fj = factors_json[k];
    if (!fj.is_object()) fail_at(path, "expected an object");

    const json& name = require(fj, "name", path);
    if (!name.is_string()) fail_at(path + ".name", "expected a string");

    if (fj.value("type", "") == "parameter") {
      if (k + 1 != factors_json.size())
        fail_at(path, "a parameter factor must be the last (innermost) factor");
      parameter_name = name.get<std::string>();
      continue;
    }

    FactorSpec f;
    f.name = name.get<std::string>();
    const json& levels = require(fj, "levels", path);
    if (!levels.is_array() || levels.empty())
      fail_at(path + ".levels", "expected a nonempty array of labels");
    for (const auto& l : levels) {
      if (!l.is_string()) fail_at(path + ".levels", "level labels must be strings");
      f.levels.push_back(l.get<std::string>());
    }

    const json& prior = require(fj, "prior", path);
    if (prior.is_string() && prior.get<std::string>() == "uniform") {
      f.prior_rows.push_back(
          std::vector<double>(f.levels.size(), 1.0 / static_cast<double>(f.levels.size())));
    } else if (prior.is_array() && !prior.empty() && prior[0].is_number()) {
      f.prior_rows.push_back(prior.get<std::vector<double>>());
    } else if (prior.is_array()) {
      for (const auto& row : prior) {
        if (!row.is_array()) fail_at(path + ".prior", "expected rows of weights");
        f.prior_rows.push_back(row.get<std::vector<double>>());
      }
    } else {
      fail_at(path + ".prior", "expected \"uniform\", a weight row, or an array of rows");
    }
    sizes.push_back(f.levels.size());
    factors.push_back(std::move(f));
  }
  return factors;
}

// Hyperparameter objects per grid cell: "components" as an array in grid
// order, a single object broadcast, or top-level fields broadcast.
std::vector<json> component_objects(const json& backend, std::size_t cells) {
  auto it = backend.find("components");
  if (it == backend.end()) return std::vector<json>(cells, backend);
  if (it->is_object()) return std::vector<json>(cells, *it);
  if (!it->is_array())
    fail_at("$.backend.components", "expected an object or an array");
  if (it->size() != cells)
    fail_at("$.backend.components", "expected " + std::to_string(cells) +
                                        " entries (one per grid cell), got " +
                                        std::to_string(it->size()));
  return std::vector<json>(it->begin(), it->end());
}

BackendPtr parse_backend(const json& spec, const std::vector<FactorSpec>& factors,
                         std::size_t cells) {
  const json& backend = require(spec, "backend", "$");
  if (!backend.is_object()) fail_at("$.backend", "expected an object");
  const json& family_json = require(backend, "family", "$.backend");
  if (!family_json.is_string()) fail_at("$.backend.family", "expected a string");
  const std::string family = family_json.get<std::string>();

  if (family == "bernoulli-fixed") {
    const json& p = require(backend, "p", "$.backend");
    if (!p.is_array() || p.size() != cells)
      fail_at("$.backend.p", "expected an array of " + std::to_string(cells) +
                                 " probabilities in grid order");
    return std::make_shared<BernoulliFixedBackend>(p.get<std::vector<double>>());
  }
  if (family == "normal-known-var") {
    std::vector<NormalKnownVarSpec> comps;
    for (const auto& cj : component_objects(backend, cells)) {
      NormalKnownVarSpec c;
      c.sigma = require_number(cj, "sigma", "$.backend");
      c.tau0 = require_number(cj, "tau0", "$.backend");
      c.theta0 = cj.value("theta0", 0.0);
      comps.push_back(c);
    }
    return std::make_shared<NormalKnownVarBackend>(std::move(comps));
  }
  if (family == "normal-invgamma") {
    std::vector<NormalInvGammaSpec> comps;
    for (const auto& cj : component_objects(backend, cells)) {
      NormalInvGammaSpec c;
      c.alpha = require_number(cj, "alpha", "$.backend");
      c.beta = require_number(cj, "beta", "$.backend");
      comps.push_back(c);
    }
    return std::make_shared<NormalInvGammaBackend>(std::move(comps));
  }
  if (family == "beta-binomial") {
    std::vector<BetaBinomialSpec> comps;
    for (const auto& cj : component_objects(backend, cells)) {
      BetaBinomialSpec c;
      c.trials = static_cast<int>(require_number(cj, "m", "$.backend"));
      c.a = require_number(cj, "a", "$.backend");
      c.b = require_number(cj, "b", "$.backend");
      comps.push_back(c);
    }
    return std::make_shared<BetaBinomialBackend>(std::move(comps));
  }
  if (family == "glm-binomial") {
    GlmGridConfig cfg;
    cfg.trials = static_cast<int>(require_number(backend, "trials", "$.backend"));
    cfg.prior_sd = backend.value("prior_sd", 10.0);
    if (backend.contains("link_factor")) {
      const std::string name = backend["link_factor"].get<std::string>();
      for (std::size_t k = 0; k < factors.size(); ++k)
        if (factors[k].name == name) cfg.link_factor = k;
      if (!cfg.link_factor) fail_at("$.backend.link_factor", "no factor named '" + name + "'");
    } else if (backend.contains("link")) {
      cfg.fixed_link = link_from_label(backend["link"].get<std::string>());
    }
    if (backend.contains("subset_factor")) {
      const std::string name = backend["subset_factor"].get<std::string>();
      for (std::size_t k = 0; k < factors.size(); ++k)
        if (factors[k].name == name) cfg.subset_factor = k;
      if (!cfg.subset_factor)
        fail_at("$.backend.subset_factor", "no factor named '" + name + "'");
    } else if (backend.contains("covariates")) {
      cfg.fixed_covariates = backend["covariates"].get<std::vector<std::string>>();
    }
    if (backend.contains("derived")) {
      for (const auto& [name, dj] : backend["derived"].items()) {
        if (!dj.is_object() || !dj.contains("square_of"))
          fail_at("$.backend.derived." + name, "expected {\"square_of\": \"<covariate>\"}");
        cfg.derived[name] = dj["square_of"].get<std::string>();
      }
    }
    const std::string target = backend.value("target", "count");
    if (target == "count") cfg.target = GlmTarget::kCount;
    else if (target == "probability") cfg.target = GlmTarget::kProbability;
    else fail_at("$.backend.target", "expected \"count\" or \"probability\"");
    if (backend.contains("x_new")) {
      for (const auto& [name, vj] : backend["x_new"].items()) {
        if (!vj.is_number()) fail_at("$.backend.x_new." + name, "expected a number");
        cfg.x_new[name] = vj.get<double>();
      }
    }
    if (backend.contains("mcmc")) {
      const json& mc = backend["mcmc"];
      cfg.chain_length = mc.value("chain", 20000);
      cfg.burn_in = mc.value("burn_in", 5000);
      cfg.step_scale = mc.value("step_scale", 0.0);
      cfg.seed = mc.value("seed", 1);
    }
    return std::make_shared<GlmBackend>(factors, std::move(cfg));
  }
  fail_at("$.backend.family", "unknown family '" + family +
                                  "' (expected normal-known-var, normal-invgamma, "
                                  "beta-binomial, bernoulli-fixed, or glm-binomial)");
}

}  // namespace

HierarchicalModel load_model_spec(const std::string& json_text) {
  json spec;
  try {
    spec = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // convert the byte offset into line:column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < json_text.size(); ++i) {
      if (json_text[i] == '\n') { ++line; col = 1; } else { ++col; }
    }
    throw ParseError("model spec: line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": " + e.what());
  }
  if (!spec.is_object()) fail_at("$", "expected a JSON object");

  std::string parameter_name;
  std::vector<std::size_t> sizes;
  auto factors = parse_factors(spec, parameter_name, sizes);
  const std::size_t cells = FactorGrid(sizes).size();
  auto backend = parse_backend(spec, factors, cells);
  return HierarchicalModel(std::move(factors), std::move(backend),
                           parameter_name.empty() ? std::nullopt
                                                  : std::optional<std::string>(parameter_name));
}

HierarchicalModel load_model_spec_file(const std::string& path) {
  return load_model_spec(read_file(path));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

Dataset parse_csv(const std::string& text, const std::string& response_column) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("dataset: line 1: empty file (a header row is required)");
  const auto header = split_csv_line(line);

  int response_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == response_column) response_idx = static_cast<int>(j);
  if (response_idx < 0)
    throw ParseError("dataset: line 1: no '" + response_column + "' column in header");

  std::vector<double> responses;
  std::vector<std::vector<double>> columns(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("dataset: line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      try {
        std::size_t used = 0;
        const double v = std::stod(fields[j], &used);
        if (used != fields[j].size()) throw std::invalid_argument("trailing characters");
        columns[j].push_back(v);
      } catch (const std::exception&) {
        throw ParseError("dataset: line " + std::to_string(line_no) + ", column '" +
                         header[j] + "': '" + fields[j] + "' is not a number");
      }
    }
  }

  std::map<std::string, std::vector<double>> covariates;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) == response_idx) continue;
    covariates[header[j]] = std::move(columns[j]);
  }
  return Dataset(std::move(columns[static_cast<std::size_t>(response_idx)]),
                 std::move(covariates));
}

}  // namespace

Dataset load_dataset_csv(const std::string& csv_text) { return parse_csv(csv_text, "y"); }

Dataset load_dataset_csv_file(const std::string& path) {
  return load_dataset_csv(read_file(path));
}

Dataset load_challenger_csv(const std::string& csv_text) {
  return parse_csv(csv_text, "damaged");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ppv
