#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "b2dcnn/common.hpp"

namespace b2dcnn {

// Seeded deterministic random source. Draws are derived from the raw
// mt19937_64 output stream (whose sequence the standard pins down exactly)
// rather than through std distributions, whose output is
// implementation-defined. Identical seeds therefore produce identical draw
// sequences on every platform.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform index in [0, n). n must be nonzero.
  std::size_t next_index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  // Independent stream keyed off this source's seed; does not disturb
  // this source's state.
  RandomSource fork(std::uint64_t salt) const { return RandomSource(derive_seed(seed_, salt)); }

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace b2dcnn
