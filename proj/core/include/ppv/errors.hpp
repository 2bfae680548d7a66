#ifndef PPV_ERRORS_HPP
#define PPV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ppv {

/// Invalid model, factor, or plan structure (an invariant is violated).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A plan references factors the model does not declare, or places the
/// backend parameter level where it cannot be conditioned on.
class PlanError : public std::invalid_argument {
 public:
  explicit PlanError(const std::string& what) : std::invalid_argument(what) {}
};

/// Conditioning on an event of posterior mass zero.
class NullEventError : public std::runtime_error {
 public:
  explicit NullEventError(const std::string& what) : std::runtime_error(what) {}
};

/// Every unnormalized posterior weight is zero (or underflowed to zero).
class DegeneratePosteriorError : public std::runtime_error {
 public:
  explicit DegeneratePosteriorError(const std::string& what) : std::runtime_error(what) {}
};

/// A per-assignment backend failed to evaluate; message names the assignment.
class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative fit did not converge (message carries the final gradient norm).
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (model spec, dataset, sweep config); message carries
/// the location (line/column or JSON path).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ppv

#endif  // PPV_ERRORS_HPP
