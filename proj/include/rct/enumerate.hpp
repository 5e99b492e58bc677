#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rct/errors.hpp"

namespace rct {

// Number of assignments with exactly k of n units treated; throws once the
// count can no longer be represented exactly.
long long choose(int n, int k);

// Visits every 0/1 vector of length n with exactly n1 ones, in a fixed
// deterministic order (lexicographically decreasing).
template <class Visit>
void for_each_complete_assignment(int n, int n1, Visit&& visit) {
  std::vector<int> d(n, 0);
  std::fill(d.begin(), d.begin() + n1, 1);
  do {
    visit(static_cast<const std::vector<int>&>(d));
  } while (std::prev_permutation(d.begin(), d.end()));
}

// Visits every product assignment across strata: `patterns[s]` holds the
// admissible local 0/1 patterns of stratum s and `positions[s]` the unit
// indices the pattern scatters to. Deterministic odometer order.
template <class Visit>
void for_each_product_assignment(
    const std::vector<std::vector<std::vector<int>>>& patterns,
    const std::vector<std::vector<int>>& positions, int n, Visit&& visit) {
  const std::size_t groups = patterns.size();
  std::vector<std::size_t> odometer(groups, 0);
  std::vector<int> d(n, 0);
  auto scatter = [&](std::size_t g) {
    const auto& pattern = patterns[g][odometer[g]];
    for (std::size_t j = 0; j < pattern.size(); ++j) d[positions[g][j]] = pattern[j];
  };
  for (std::size_t g = 0; g < groups; ++g) scatter(g);
  while (true) {
    visit(static_cast<const std::vector<int>&>(d));
    std::size_t g = 0;
    for (; g < groups; ++g) {
      if (++odometer[g] < patterns[g].size()) {
        scatter(g);
        break;
      }
      odometer[g] = 0;
      scatter(g);
    }
    if (g == groups) break;
  }
}

// All local patterns of a stratum: n units, n1 treated.
std::vector<std::vector<int>> local_patterns(int n, int n1);

}  // namespace rct
