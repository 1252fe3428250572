#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace nlmi {

/// splitmix64 finalizer; used for seeding and sub-seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a stream tag.
/// derive_seed(s, "init") and derive_seed(s, "batch") never collide in practice.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// xoshiro256** generator, state seeded from four splitmix64 outputs.
///
/// All distributions below are implemented here rather than taken from
/// <random>, whose distribution algorithms are implementation-defined.
/// The same seed therefore yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer on [0, n), unbiased (rejection sampling). n > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace nlmi
