#pragma once

#include <cstdint>
#include <vector>

namespace rct {

// One SplitMix64 step (Steele, Lea & Flood 2014). Advances `state` and
// returns the next output. Fully specified, so seeds reproduce everywhere.
std::uint64_t splitmix64(std::uint64_t& state);

// Seed-splitting rule used for parallel replication streams:
//   derive_seed(s, i) = splitmix64 mix of s xored with a mixed index.
// Distinct indices give statistically independent streams for any base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// xoshiro256++ (Blackman & Vigna 2019), state seeded via SplitMix64.
// All distributions below are implemented from raw 64-bit outputs; nothing
// depends on std:: distribution objects, so sequences are identical across
// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // 53-bit uniform, strictly inside (0,1).
  double uniform01();

  // Unbiased integer in [0, n), n >= 1, by rejection sampling.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via inverse CDF (AS 241) applied to uniform01().
  double normal();

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

// Quantile of the standard normal distribution (Wichura's algorithm AS 241,
// double-precision branch; absolute error well below 1e-12 on (0,1)).
double normal_quantile(double p);

}  // namespace rct
