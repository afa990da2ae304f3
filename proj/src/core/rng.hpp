// Deterministic random streams. All sampling in the pipeline goes through
// this class so that a (stage seed, entity id) pair fully determines the
// draw sequence, independent of library version or platform.
#pragma once

#include <cstdint>
#include <vector>

namespace tdg {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Raw 64-bit output (xoshiro256++).
  std::uint64_t next();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p);

  // Index drawn proportionally to non-negative weights (need not sum to 1).
  std::size_t categorical(const std::vector<double>& weights);

  // Standard normal via Box-Muller (no state caching; two raws per call).
  double normal();

  // Independent child stream; stable under reordering of derive calls.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t s_[4];
};

}  // namespace tdg
