// Loading of model spec documents (JSON) and datasets (CSV).

#ifndef PPV_MODEL_IO_HPP
#define PPV_MODEL_IO_HPP

#include <iosfwd>
#include <string>

#include "ppv/model.hpp"

namespace ppv {

/// Parse a model spec document.
///
/// Schema (JSON):
///   {
///     "factors": [
///       {"name": "link", "levels": ["L","C","P"], "prior": "uniform"},
///       {"name": "subset", "levels": [...], "prior": [[...], ...]},
///       {"name": "theta", "type": "parameter"}        // optional, last only
///     ],
///     "backend": {"family": "...", ...per-family fields...}
///   }
///
/// Families: normal-known-var, normal-invgamma, beta-binomial,
/// bernoulli-fixed, glm-binomial.  Grid-valued hyperparameters are given as
/// a "components" array in grid order (or one object, broadcast).
/// Errors carry the JSON path (semantic) or line:column (syntax).
HierarchicalModel load_model_spec(const std::string& json_text);
HierarchicalModel load_model_spec_file(const std::string& path);

/// CSV with a header row; the response column is named "y", every other
/// column is a named covariate.  Errors are line-addressed.
Dataset load_dataset_csv(const std::string& csv_text);
Dataset load_dataset_csv_file(const std::string& path);

/// The bundled Challenger file layout: columns damaged,t,s with the damaged
/// counts as the response.
Dataset load_challenger_csv(const std::string& csv_text);

std::string read_file(const std::string& path);

}  // namespace ppv

#endif  // PPV_MODEL_IO_HPP
