#pragma once
#include <cmath>
#include <cstdint>
#include <limits>

namespace snspd {

/// Deterministic random substream, independent of the standard library's
/// distribution implementations so that results are reproducible across
/// platforms and compilers.
///
/// The core generator is xoshiro256**; each (seed, stream) pair is expanded
/// into an independent state with splitmix64. Streams derived from the same
/// master seed but different stream ids are statistically independent, which
/// is what makes per-pulse / per-column parallelism give thread-count
/// independent results.
class RandomStream {
public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& s : state_) s = splitmix64(x);
    // avoid the all-zero state
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the polar method (one cached value).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Exponential with the given rate (events per unit time).
  double exponential(double rate) {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u) / rate;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson sample; Knuth's product method for small means, halving
  /// recursion keeps the uniform count bounded for large ones.
  long poisson(double mu) {
    if (mu <= 0.0) return 0;
    long n = 0;
    while (mu > 32.0) {
      // split: Poisson(mu) = Poisson(mu/2) + Poisson(mu/2)
      n += poisson_small(mu / 2);
      mu /= 2;
    }
    return n + poisson_small(mu);
  }

  /// Geometric photon-number sample with mean nbar (thermal statistics).
  long thermal(double nbar) {
    if (nbar <= 0.0) return 0;
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return static_cast<long>(std::floor(std::log(u) / std::log(nbar / (1.0 + nbar))));
  }

private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  long poisson_small(double mu) {
    const double limit = std::exp(-mu);
    long n = 0;
    double prod = uniform();
    while (prod > limit) {
      ++n;
      prod *= uniform();
    }
    return n;
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

namespace detail {

/// Compensated (Kahan) accumulator for alternating or long sums.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

}  // namespace detail

}  // namespace snspd
