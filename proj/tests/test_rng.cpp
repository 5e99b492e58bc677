#include <doctest.h>

#include <cmath>
#include <set>

#include "oracle_helpers.hpp"
#include "rct/rng.hpp"

using namespace rct;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived replicate seeds differ") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(7, i));
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(7, 3) != derive_seed(8, 3));
}

TEST_CASE("uniform01 stays strictly inside the unit interval") {
  Rng rng(1);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("below is bounded and roughly uniform") {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
  CHECK_THROWS(rng.below(0));
}

TEST_CASE("normal quantile matches a bisection oracle to 1e-8") {
  for (double p : {1e-6, 1e-3, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.975, 0.999,
                   1.0 - 1e-6}) {
    CHECK(normal_quantile(p) ==
          testref::near(testref::normal_quantile_bisect(p), 1e-8));
  }
  CHECK(normal_quantile(0.95) == testref::near(1.6449, 1e-4));
  CHECK(normal_quantile(0.975) == testref::near(1.959964, 1e-5));
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("normal draws have the right first two moments") {
  Rng rng(3);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / draws;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(sum_sq / draws - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> v2 = v1;
  Rng a(9), b(9);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}
