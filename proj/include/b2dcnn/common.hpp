#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace b2dcnn {

using Vec = std::vector<double>;

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or parameter value. CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with corpus, embedding, or checkpoint inputs. CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives independent seed streams from one master seed. Every source of
// randomness in the toolkit is keyed this way so that runs are reproducible
// and the concurrent mini-batch path draws exactly what the serial path does.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return mix64(base ^ mix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix64(derive_seed(base, a) ^ mix64(b));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  return mix64(derive_seed(base, a, b) ^ mix64(c));
}

}  // namespace b2dcnn
