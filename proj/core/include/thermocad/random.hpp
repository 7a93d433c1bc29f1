#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace thermocad {

/// Seeded random source used everywhere a stochastic choice is made.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are computed here rather than through
/// <random>'s distribution objects, whose algorithms are left to the
/// implementation, so that a seed yields the same stream on every
/// toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Standard normal via the Box-Muller transform.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Mixes a base seed with a list of tags into an independent child seed.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace thermocad
