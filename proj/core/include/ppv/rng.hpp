// Counter-based seeded RNG for deterministic Monte Carlo.
//
// Streams are derived by hashing (seed, stream ids...) with splitmix64, so a
// stream for (term j, outer sample i) is the same no matter which thread
// evaluates it or in what order.  All variate transforms are implemented here
// (Box-Muller, Marsaglia-Tsang, inverse-CDF) instead of <random> distributions
// so sequences are stable across standard library implementations.

#ifndef PPV_RNG_HPP
#define PPV_RNG_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace ppv {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix_in(0x8B72E3F1D4C5A697ULL, seed)) {}

  /// Derive an independent stream from (seed, id0, id1, ...).
  template <class... Ids>
  static RngStream derive(std::uint64_t seed, Ids... ids) {
    std::uint64_t s = mix_in(0x8B72E3F1D4C5A697ULL, seed);
    ((s = mix_in(s, static_cast<std::uint64_t>(ids))), ...);
    RngStream r(0);
    r.state_ = s;
    return r;
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + uniform() * (b - a); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Lemire-style rejection keeps the map unbiased.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (0ULL - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller (one value per call; the pair's second
  /// member is discarded to keep the stream position independent of use).
  double normal() {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Binomial(m, p) by inversion for small m (our trial counts are <= 30).
  int binomial(int m, double p) {
    int k = 0;
    for (int i = 0; i < m; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  /// Gamma(shape, scale) via Marsaglia-Tsang squeeze; shape < 1 boosted.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  double inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

  /// Draw an index from a cumulative weight table (inverse CDF).
  std::size_t categorical_from_cdf(std::span<const double> cdf) {
    const double u = uniform() * cdf.back();
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cdf[mid] <= u) lo = mid + 1; else hi = mid;
    }
    return lo;
  }

 private:
  static std::uint64_t mix_in(std::uint64_t state, std::uint64_t v) {
    std::uint64_t s = state ^ (v + 0x9E3779B97F4A7C15ULL + (state << 6) + (state >> 2));
    splitmix64(s);
    return s;
  }

  std::uint64_t state_;
};

/// Pairwise summation: deterministic (order-fixed) and more accurate than a
/// running sum; used for every Monte Carlo reduction so results do not depend
/// on thread scheduling.
double pairwise_sum(std::span<const double> xs);

/// Mean via pairwise summation.
double pairwise_mean(std::span<const double> xs);

/// Unbiased sample variance (n-1 divisor) of xs.
double sample_variance(std::span<const double> xs);

/// Standard error of the sample variance of xs (moment/delta-method form).
double se_of_sample_variance(std::span<const double> xs);

}  // namespace ppv

#endif  // PPV_RNG_HPP
