#pragma once

#include <cstdint>
#include <string_view>

namespace lrgp {

// Deterministic, splittable PRNG (xoshiro256++ seeded through SplitMix64).
// Named streams derived from the same seed are independent of each other and
// of the parent; drawing from one stream never perturbs another. Sampling is
// implemented directly (Box-Muller for normals) so sequences are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derive an independent stream. Same (seed, name) always yields the same
  // stream; the parent is left untouched.
  [[nodiscard]] Rng stream(std::string_view name) const;
  [[nodiscard]] Rng stream(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double gaussian();                       // standard normal
  // Fisher-Yates shuffle of [0, n) written into out.
  void shuffle_indices(int n, int* out);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t state_[4];
  std::uint64_t seed_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace lrgp
