#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace adn {

using Rng = std::mt19937_64;

/// SplitMix64 step, used to derive independent seeds from one run seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// One RNG per subsystem so that, e.g., a change in the number of features
/// created does not perturb the order in which training data is drawn.
struct RngStreams {
  explicit RngStreams(std::uint64_t seed)
      : creation(splitmix64(seed ^ 0x6372656174696f6eULL)),
        data(splitmix64(seed ^ 0x64617461ULL)),
        init(splitmix64(seed ^ 0x696e6974ULL)) {}

  Rng creation;
  Rng data;
  Rng init;
};

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(rng) < p;
}

/// Uniform index in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// `count` distinct elements drawn uniformly without replacement from `pool`.
template <typename T>
std::vector<T> sample_distinct(Rng& rng, std::vector<T> pool, std::size_t count) {
  if (count > pool.size()) count = pool.size();
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace adn
