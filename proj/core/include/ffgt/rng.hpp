#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ffgt {

// Deterministic random source used everywhere randomness is needed.
//
// xoshiro256** seeded through splitmix64. Rolled by hand instead of
// <random> because the standard distributions are implementation-defined,
// and the artifact promises byte-identical outputs for identical seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent stream from (seed, a, b). Used for splittable
  // per-sample seeding: stream(seed, split_id, sample_index).
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double next_double();

  // Uniform integer in [lo, hi] inclusive, unbiased (rejection sampling).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform double in [lo, hi).
  double uniform_real(double lo, double hi);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);

 private:
  std::array<std::uint64_t, 4> state_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ffgt
