#include "ppv/cscope.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ppv {

namespace {

std::vector<std::size_t> bits_of(std::uint32_t mask) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; mask; ++k, mask >>= 1)
    if (mask & 1u) out.push_back(k);
  return out;
}

// Ordered set partitions of `mask`, first block chosen over nonempty subsets
// of the remaining mask in ascending bitmask order.
void partitions_of(std::uint32_t mask, std::vector<std::vector<std::size_t>>& prefix,
                   std::vector<std::vector<std::vector<std::size_t>>>& out) {
  if (mask == 0) {
    out.push_back(prefix);
    return;
  }
  // iterate nonempty submasks of mask in ascending order
  for (std::uint32_t sub = mask & (~mask + 1u);;) {
    prefix.push_back(bits_of(sub));
    partitions_of(mask & ~sub, prefix, out);
    prefix.pop_back();
    if (sub == mask) break;
    sub = (sub - mask) & mask;  // next submask upward
  }
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r))
    throw ValidationError("count_plans: result exceeds 64 bits");
  return r;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r))
    throw ValidationError("count_plans: result exceeds 64 bits");
  return r;
}

std::vector<std::uint64_t> binomial_row(std::size_t n) {
  // built in place so row[j] ends up as C(n, j)
  std::vector<std::uint64_t> row(n + 1, 0);
  row[0] = 1;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i; j >= 1; --j) row[j] = checked_add(row[j], row[j - 1]);
  return row;
}

}  // namespace

std::string DecompositionPlan::violation() const {
  if (blocks.empty()) return "a plan needs at least one conditioning block (m >= 1)";
  std::set<std::size_t> seen;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty())
      return "block " + std::to_string(b + 1) + " is empty";
    for (std::size_t k : blocks[b]) {
      if (k >= factor_count)
        return "block " + std::to_string(b + 1) + " references factor V" +
               std::to_string(k + 1) + " beyond K=" + std::to_string(factor_count);
      if (!seen.insert(k).second)
        return "factor V" + std::to_string(k + 1) + " appears more than once";
    }
  }
  for (std::size_t k : latent) {
    if (k >= factor_count)
      return "latent set references factor V" + std::to_string(k + 1) + " beyond K=" +
             std::to_string(factor_count);
    if (!seen.insert(k).second)
      return "factor V" + std::to_string(k + 1) + " is both manifest and latent";
  }
  if (seen.size() != factor_count)
    return "some factor is neither in a block nor latent";
  return {};
}

std::vector<DecompositionPlan> enumerate_plans(std::size_t factor_count) {
  if (factor_count < 1 || factor_count > 6)
    throw ValidationError("enumerate_plans: K must be in [1, 6], got " +
                          std::to_string(factor_count));
  const std::uint32_t full = (1u << factor_count) - 1u;

  // Manifest subsets by size, then ascending bitmask (== lexicographic on the
  // sorted element lists).
  std::vector<std::uint32_t> subsets;
  for (std::size_t size = 1; size <= factor_count; ++size)
    for (std::uint32_t s = 1; s <= full; ++s)
      if (static_cast<std::size_t>(__builtin_popcount(s)) == size) subsets.push_back(s);

  std::vector<DecompositionPlan> plans;
  for (std::uint32_t s : subsets) {
    std::vector<std::vector<std::vector<std::size_t>>> parts;
    std::vector<std::vector<std::size_t>> prefix;
    partitions_of(s, prefix, parts);
    const auto latent = bits_of(full & ~s);
    for (auto& blocks : parts) {
      DecompositionPlan plan;
      plan.blocks = std::move(blocks);
      plan.latent = latent;
      plan.factor_count = factor_count;
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::uint64_t fubini_number(std::size_t n) {
  // a(n) = sum_{i=1..n} C(n,i) a(n-i), a(0) = 1
  std::vector<std::uint64_t> a(n + 1, 0);
  a[0] = 1;
  for (std::size_t j = 1; j <= n; ++j) {
    const auto binom = binomial_row(j);
    std::uint64_t total = 0;
    for (std::size_t i = 1; i <= j; ++i)
      total = checked_add(total, checked_mul(binom[i], a[j - i]));
    a[j] = total;
  }
  return a[n];
}

std::uint64_t count_plans(std::size_t factor_count) {
  if (factor_count < 1)
    throw ValidationError("count_plans: K must be >= 1");
  const auto binom = binomial_row(factor_count);
  std::uint64_t total = 0;
  for (std::size_t j = 1; j <= factor_count; ++j)
    total = checked_add(total, checked_mul(binom[j], fubini_number(j)));
  return total;
}

namespace {

std::string subscript(const std::vector<std::size_t>& block) {
  std::string s;
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (i) s += ",";
    s += "V" + std::to_string(block[i] + 1);
  }
  return s;
}

std::string conditioning_list(const DecompositionPlan& plan, std::size_t through_block) {
  std::string s;
  for (std::size_t b = 0; b <= through_block; ++b) {
    for (std::size_t k : plan.blocks[b]) {
      if (!s.empty()) s += ",";
      s += "V" + std::to_string(k + 1);
    }
  }
  return s;
}

}  // namespace

std::vector<TermLabel> term_labels(const DecompositionPlan& plan) {
  if (const auto why = plan.violation(); !why.empty())
    throw ValidationError("invalid plan: " + why);

  const std::size_t m = plan.blocks.size();
  std::vector<TermLabel> labels;
  labels.reserve(m + 1);

  // Leading term: E over every block, Var of the target given all of them.
  {
    TermLabel lead;
    lead.leading = true;
    std::string text;
    for (std::size_t b = 0; b < m; ++b) text += "E_{" + subscript(plan.blocks[b]) + "}";
    text += "Var(Y|" + conditioning_list(plan, m - 1) + ",D)";
    lead.text = std::move(text);
    labels.push_back(std::move(lead));
  }
  // Block terms from j = m down to 1: E_{B_1}..E_{B_{j-1}} Var_{B_j} E(...).
  for (std::size_t j = m; j-- > 0;) {
    TermLabel t;
    t.var_block = j;
    std::string text;
    for (std::size_t b = 0; b < j; ++b) text += "E_{" + subscript(plan.blocks[b]) + "}";
    text += "Var_{" + subscript(plan.blocks[j]) + "}";
    text += "E(Y|" + conditioning_list(plan, j) + ",D)";
    t.text = std::move(text);
    labels.push_back(std::move(t));
  }
  return labels;
}

DecompositionPlan parse_plan(const std::string& text, std::size_t factor_count) {
  DecompositionPlan plan;
  plan.factor_count = factor_count;

  std::vector<std::size_t> current;
  std::size_t number_start = std::string::npos;
  long value = 0;
  std::vector<bool> used(factor_count, false);

  auto fail = [&](std::size_t pos, const std::string& why) {
    throw ParseError("plan \"" + text + "\": " + why + " at position " +
                     std::to_string(pos + 1));
  };
  auto finish_number = [&](std::size_t end_pos) {
    if (number_start == std::string::npos) fail(end_pos, "expected a factor index");
    if (value < 1 || static_cast<std::size_t>(value) > factor_count)
      fail(number_start, "factor index " + std::to_string(value) + " out of range 1.." +
                             std::to_string(factor_count));
    const std::size_t k = static_cast<std::size_t>(value - 1);
    if (used[k]) fail(number_start, "factor " + std::to_string(value) + " repeated");
    used[k] = true;
    current.push_back(k);
    number_start = std::string::npos;
    value = 0;
  };

  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c >= '0' && c <= '9') {
      if (number_start == std::string::npos) number_start = pos;
      value = value * 10 + (c - '0');
      if (value > 64) fail(number_start, "factor index too large");
    } else if (c == ',') {
      finish_number(pos);
    } else if (c == '|') {
      finish_number(pos);
      std::sort(current.begin(), current.end());
      plan.blocks.push_back(std::move(current));
      current.clear();
    } else if (c == ' ') {
      if (number_start != std::string::npos) finish_number(pos);
    } else {
      fail(pos, std::string("unexpected character '") + c + "'");
    }
  }
  finish_number(text.size());
  std::sort(current.begin(), current.end());
  plan.blocks.push_back(std::move(current));

  for (std::size_t k = 0; k < factor_count; ++k)
    if (!used[k]) plan.latent.push_back(k);

  if (const auto why = plan.violation(); !why.empty())
    throw ParseError("plan \"" + text + "\": " + why);
  return plan;
}

std::string format_plan(const DecompositionPlan& plan) {
  std::ostringstream out;
  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    if (b) out << "|";
    for (std::size_t i = 0; i < plan.blocks[b].size(); ++i) {
      if (i) out << ",";
      out << plan.blocks[b][i] + 1;
    }
  }
  return out.str();
}

}  // namespace ppv
