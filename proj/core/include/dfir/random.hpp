#pragma once

#include <cstdint>
#include <random>

#include "dfir/tensor.hpp"

namespace dfir {

// Seeded generator whose output is identical across platforms and standard
// libraries: it maps raw mt19937_64 words directly instead of going through
// the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Values drawn uniformly from [lo, hi].
Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     DType dtype = DType::f64);
Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                     DType dtype = DType::f64);

// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace dfir
