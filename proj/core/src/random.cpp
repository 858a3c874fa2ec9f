#include "dfir/random.hpp"

namespace dfir {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi, DType dtype) {
  Tensor t(shape, DType::f64);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  t.set_dtype(dtype);
  return t;
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi, DType dtype) {
  Rng rng(seed);
  return random_tensor(shape, rng, lo, hi, dtype);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dfir
