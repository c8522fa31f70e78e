#pragma once

#include <cstdint>
#include <cmath>
#include <utility>
#include <vector>

namespace cxr {

// Seedable 64-bit generator used for every randomized decision in the
// pipeline (shuffles, augmentation draws, synthetic rendering). The exact
// algorithm is part of the split/fold file contract: splits written with a
// given seed must be reproducible by any reimplementation, so the update is
// pinned to splitmix64 (Steele, Lea & Flood 2014) rather than left to the
// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant here; determinism
  // is the contract.
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  // Standard normal via Box-Muller (cosine branch only, so each call
  // consumes exactly two raw draws).
  double gaussian() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return next_double() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Derives an independent substream seed from a base seed and stream tags.
// Defined as iterated splitmix64 over seed ^ tag_i * golden so that
// (seed, epoch, index)-style streams never collide in practice.
inline std::uint64_t mix_seed(std::uint64_t seed) { return Rng(seed).next_u64(); }

template <typename... Tags>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
  std::uint64_t s = Rng(seed ^ tag * 0x9E3779B97F4A7C15ull).next_u64();
  if constexpr (sizeof...(rest) == 0)
    return s;
  else
    return mix_seed(s, rest...);
}

}  // namespace cxr
