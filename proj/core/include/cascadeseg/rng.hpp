#pragma once

#include <array>
#include <cstdint>

namespace cseg {

/// Deterministic 64-bit PRNG: xoshiro256** seeded through splitmix64.
///
/// The generator identity is part of the reproducibility contract: datasets,
/// weight initialization and dropout masks regenerated from the same seed must
/// be bit-identical, so no standard-library distribution objects are used
/// anywhere. Derived quantities are defined as:
///   uniform()          = (next_u64() >> 11) * 2^-53            in [0, 1)
///   uniform(lo, hi)    = lo + (hi - lo) * uniform()
///   uniform_int(lo,hi) = lo + next_u64() % (hi - lo + 1)
///   normal(m, s)       = Box-Muller on (1 - uniform()], second value cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  /// Independent stream for (seed, stream), e.g. one stream per sample index.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    x ^= stream * 0x9e3779b97f4a7c15ull;
    return Rng(a ^ splitmix64(x));
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

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal(double mean, double sigma);

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace cseg
