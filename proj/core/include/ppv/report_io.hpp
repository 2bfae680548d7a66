// Result serialization: decomposition CSV/JSON, sweep curve files, and the
// per-run manifest.

#ifndef PPV_REPORT_IO_HPP
#define PPV_REPORT_IO_HPP

#include <ctime>
#include <json.hpp>
#include <string>

#include "ppv/decompose.hpp"

namespace ppv {

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

/// Minimal CSV quoting: fields with commas or quotes are quoted.
std::string csv_escape(const std::string& field);

/// Columns: plan, term_label, value, std_error, proportion, engine, seed.
std::string result_to_csv(const DecompositionResult& result);

/// JSON mirror of the CSV plus residual, total, and the conservation flag.
nlohmann::json result_to_json(const DecompositionResult& result);

struct RunManifest {
  std::string command;
  nlohmann::json config;  // full config snapshot
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::time_t started = 0;  // set via manifest_now() when the run begins
};

/// Wall clock, or SOURCE_DATE_EPOCH when that is set.
std::time_t manifest_now();

/// Manifest JSON with version and timestamps.  Timestamps honour
/// SOURCE_DATE_EPOCH so reruns can be made byte-identical.
nlohmann::json manifest_to_json(const RunManifest& manifest);

void write_file(const std::string& path, const std::string& content);

}  // namespace ppv

#endif  // PPV_REPORT_IO_HPP
