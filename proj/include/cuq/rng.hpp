#pragma once

#include <cstdint>
#include <random>

#include "cuq/math_util.hpp"

namespace cuq {

/// Seeded random stream. All variate generation goes through the documented
/// mappings below (mt19937_64 + inverse-cdf transforms), so a given seed
/// reproduces the same sequence everywhere; none of the implementation-defined
/// <random> distributions are used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform on the open interval (0,1): (raw >> 11 + 0.5) * 2^-53.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by inverse cdf.
  double normal() { return normal_quantile(uniform()); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

  /// Independent child stream; does not advance this stream.
  Rng fork(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0) const {
    return Rng(derive_seed(seed_, label, a, b));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace cuq
