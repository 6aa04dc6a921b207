#pragma once

#include <cstdint>
#include <limits>

namespace rawforge {

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent seed for a named stream / index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(stream * 0xd1b54a32d192ed03ULL + 1));
}

/// Stateless counter-based draws: the value depends only on (key, counter).
struct CounterRng {
  std::uint64_t key;

  explicit constexpr CounterRng(std::uint64_t seed) : key(mix64(seed + 0x9e3779b97f4a7c15ULL)) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key ^ mix64(counter + 0x632be59bd9b4e019ULL));
  }
  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t counter) const;
  /// Standard normal via Box-Muller on counters (2i, 2i+1).
  double normal(std::uint64_t index) const;
};

/// Sequential splitmix64 generator (UniformRandomBitGenerator).
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer uniform on [lo, hi].
  int uniform_int(int lo, int hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace rawforge
