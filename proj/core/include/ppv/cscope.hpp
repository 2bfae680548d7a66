// Enumeration of variance decompositions: choose a nonempty manifest subset
// of the K factors, split it into an ordered sequence of conditioning blocks,
// and leave the remainder latent.  Every such choice is one member of the
// model's C-scope and yields blocks+1 terms.

#ifndef PPV_CSCOPE_HPP
#define PPV_CSCOPE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ppv/errors.hpp"

namespace ppv {

/// One decomposition: ordered conditioning blocks B_1..B_m over 0-based
/// factor indices, plus the latent remainder.  Valid plans have m >= 1,
/// pairwise-disjoint nonempty blocks, and blocks + latent partitioning a
/// subset of {0..K-1} with everything else accounted for.
struct DecompositionPlan {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::size_t> latent;
  std::size_t factor_count = 0;

  std::size_t block_count() const { return blocks.size(); }
  std::size_t term_count() const { return blocks.size() + 1; }

  /// Empty string when valid; otherwise names the violated invariant.
  std::string violation() const;

  bool operator==(const DecompositionPlan&) const = default;
};

/// One labeled term of a plan, in report order: index 0 is the leading
/// E...E Var term; index j >= 1 is the Var_{B_{m+1-j}} E term.
struct TermLabel {
  std::string text;
  bool leading = false;
  /// For non-leading labels, the 0-based index into plan.blocks of the block
  /// the variance is taken over.
  std::size_t var_block = 0;
};

/// Every plan for K factors, canonically ordered: manifest subsets by size
/// then lexicographically, and for each subset its ordered set partitions
/// with first blocks in ascending subset order, recursively.
/// Requires 1 <= K <= 6 (each plan drives a full decomposition; bigger grids
/// are not desk scale).
std::vector<DecompositionPlan> enumerate_plans(std::size_t factor_count);

/// Cardinality of the C-scope: sum over manifest subset sizes j of
/// C(K,j) * Fubini(j), with Fubini(j) the ordered-set-partition count.
/// Works for any K >= 1 that fits in 64 bits (throws on overflow).
std::uint64_t count_plans(std::size_t factor_count);

/// Fubini (ordered Bell) numbers by the binomial recurrence; a(0) = 1.
std::uint64_t fubini_number(std::size_t n);

/// The m+1 labels of a plan, leading term first, then variance terms from
/// block m down to block 1.  Throws ValidationError for invalid plans.
std::vector<TermLabel> term_labels(const DecompositionPlan& plan);

/// Plan text: blocks separated by '|', factors within a block by ',',
/// 1-based factor indices, latent factors omitted.  "1|2" conditions on V1
/// then V2; "1,2" conditions on the pair jointly; "2" leaves V1 latent.
DecompositionPlan parse_plan(const std::string& text, std::size_t factor_count);

std::string format_plan(const DecompositionPlan& plan);

}  // namespace ppv

#endif  // PPV_CSCOPE_HPP
