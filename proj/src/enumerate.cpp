#include "rct/enumerate.hpp"

namespace rct {

long long choose(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long result = 1;
  for (int i = 1; i <= k; ++i) {
    if (result > 9'000'000'000'000'000LL / (n - k + i))
      throw Error("choose: combinatorial count overflows");
    result = result * (n - k + i) / i;
  }
  return result;
}

std::vector<std::vector<int>> local_patterns(int n, int n1) {
  std::vector<std::vector<int>> patterns;
  patterns.reserve(static_cast<std::size_t>(choose(n, n1)));
  for_each_complete_assignment(n, n1, [&](const std::vector<int>& d) {
    patterns.push_back(d);
  });
  return patterns;
}

}  // namespace rct
