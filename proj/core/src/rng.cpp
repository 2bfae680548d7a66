#include "ppv/rng.hpp"

#include <cstdlib>

namespace ppv {

double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double pairwise_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = pairwise_mean(xs);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - m;
    sq[i] = d * d;
  }
  return pairwise_sum(sq) / static_cast<double>(n - 1);
}

double se_of_sample_variance(std::span<const double> xs) {
  // Var(s^2) = (mu4 - sigma^4 (n-3)/(n-1)) / n for IID samples.
  const std::size_t n = xs.size();
  if (n < 4) return 0.0;
  const double m = pairwise_mean(xs);
  std::vector<double> sq(n), quart(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - m;
    sq[i] = d * d;
    quart[i] = d * d * d * d;
  }
  const double nn = static_cast<double>(n);
  const double s2 = pairwise_sum(sq) / (nn - 1.0);
  const double mu4 = pairwise_sum(quart) / nn;
  const double v = (mu4 - s2 * s2 * (nn - 3.0) / (nn - 1.0)) / nn;
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

}  // namespace ppv
