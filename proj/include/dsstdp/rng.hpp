#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace dsstdp {

/// SplitMix64 generator. Cheap to seed, so independent streams can be derived
/// per (sample, pixel) key without sharing state between workers.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Order-sensitive hash of a key tuple into a stream seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6A09E667F3BCC908ULL;
  for (auto p : parts) {
    SplitMix64 g(h ^ p);
    h = g() + 0x9E3779B97F4A7C15ULL * (h >> 7);
  }
  return SplitMix64(h)();
}

}  // namespace dsstdp
