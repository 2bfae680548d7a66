#include "ppv/report_io.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>

namespace ppv {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string result_to_csv(const DecompositionResult& result) {
  std::string out = "plan,term_label,value,std_error,proportion,engine,seed\n";
  const auto props = result.proportions();
  const std::string plan_text = format_plan(result.plan);
  for (std::size_t t = 0; t < result.terms.size(); ++t) {
    const auto& term = result.terms[t];
    out += csv_escape(plan_text) + "," + csv_escape(term.label.text) + "," +
           format_double(term.value) + "," + format_double(term.std_error) + "," +
           format_double(props[t]) + "," + engine_name(result.engine) + "," +
           std::to_string(result.seed) + "\n";
  }
  return out;
}

nlohmann::json result_to_json(const DecompositionResult& result) {
  nlohmann::json terms = nlohmann::json::array();
  const auto props = result.proportions();
  for (std::size_t t = 0; t < result.terms.size(); ++t) {
    const auto& term = result.terms[t];
    terms.push_back({{"label", term.label.text},
                     {"value", term.value},
                     {"std_error", term.std_error},
                     {"proportion", props[t]}});
  }
  nlohmann::json j{{"plan", format_plan(result.plan)},
                   {"engine", engine_name(result.engine)},
                   {"seed", result.seed},
                   {"total", result.total},
                   {"residual", result.residual},
                   {"residual_se", result.residual_se},
                   {"conservation_ok", result.conservation_ok()},
                   {"terms", std::move(terms)}};
  if (result.engine == Engine::kMonteCarlo) {
    j["budget"] = {{"outer", result.budget.outer}, {"inner", result.budget.inner}};
  }
  return j;
}

namespace {

std::string iso8601_utc(std::time_t t) {
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::time_t manifest_time() {
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    return static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  }
  return std::time(nullptr);
}

}  // namespace

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  const std::time_t start = manifest.started ? manifest.started : manifest_time();
  return nlohmann::json{{"command", manifest.command},
                        {"config", manifest.config},
                        {"seed", manifest.seed},
                        {"artifact_version", "0.1.0"},
                        {"timestamps",
                         {{"start", iso8601_utc(start)}, {"end", iso8601_utc(manifest_time())}}},
                        {"outputs", manifest.outputs}};
}

std::time_t manifest_now() { return manifest_time(); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  out << content;
}

}  // namespace ppv
