#pragma once

#include <cmath>
#include <cstdint>

namespace snnid {

// Seedable 64-bit generator with a pinned algorithm so noise streams and
// weight draws can be regenerated from a seed alone, in any language.
//
//   state init   SplitMix64: four successive outputs of
//                z = (s += 0x9E3779B97F4A7C15);
//                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//                z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//                return z ^ (z >> 31);
//   next()       xoshiro256** (Blackman & Vigna, 2018)
//   uniform()    (next() >> 11) * 2^-53                -> [0, 1)
//   normal()     Box-Muller on exactly two draws:
//                u1 = ((next() >> 11) + 1) * 2^-53     -> (0, 1]
//                u2 = (next() >> 11) * 2^-53
//                return sqrt(-2 ln u1) * cos(2 pi u2)
//
// Every consumer documents its draw order next to the code that draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = split_mix(s);
  }

  std::uint64_t next() {
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

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal; consumes exactly two raw draws.
  double normal() {
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Random sign with equal probability; consumes one raw draw.
  double sign() { return (next() >> 63) ? -1.0 : 1.0; }

  // Decorrelated stream seed for sub-task k of a run seeded with `seed`.
  static std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (k + 1));
    return split_mix(s);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t split_mix(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace snnid
