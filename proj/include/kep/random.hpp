// random.hpp
// Seeded random streams. Only the engine comes from <random>; the
// distributions are written out so results are identical across standard
// library implementations.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace kep {

/// splitmix64 finaliser; derives independent stream seeds from (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate; +inf rate gives 0.
  double exponential(double rate) {
    if (std::isinf(rate)) return 0.0;
    return -std::log1p(-uniform()) / rate;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n), unbiased.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (const double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    for (std::size_t k = weights.size(); k-- > 0;) {
      if (weights[k] > 0) return k;
    }
    return 0;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t k = values.size(); k > 1; --k) {
      std::swap(values[k - 1], values[index(k)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kep
