#include "rct/permute.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rct/design.hpp"
#include "rct/enumerate.hpp"
#include "rct/errors.hpp"
#include "rct/estimate.hpp"
#include "rct/variance.hpp"

namespace rct {

PermutationStatistic statistic_by_name(const std::string& name) {
  if (name == "dim") {
    return [](const std::vector<double>& y, const std::vector<int>& d) {
      return std::fabs(diff_in_means(y, d));
    };
  }
  if (name == "dim-studentized") {
    return [](const std::vector<double>& y, const std::vector<int>& d) {
      return std::fabs(diff_in_means(y, d)) / std::sqrt(arm_robust_variance(y, d));
    };
  }
  throw MismatchError("unknown permutation statistic '" + name + "'");
}

namespace {

constexpr long long kExhaustiveCap = 1'000'000;

struct Resampler {
  std::function<void(Rng&, std::vector<int>&)> draw;
  std::function<void(const std::function<void(const std::vector<int>&)>&)> enumerate;
  long long total = 0;
};

Resampler make_resampler(const Sample& sample, const DesignSpec& design) {
  const int n = sample.n();
  Resampler rs;
  switch (design.kind) {
    case DesignKind::Complete: {
      const int n1 = floor_count(design.pi, n);
      if (n1 != sample.n_treated())
        throw MismatchError(
            "permutation_test: observed treated count " +
            std::to_string(sample.n_treated()) + " does not match the design's " +
            std::to_string(n1));
      rs.total = choose(n, n1);
      rs.draw = [n, n1](Rng& rng, std::vector<int>& d) {
        d.assign(n, 0);
        std::fill(d.begin(), d.begin() + n1, 1);
        rng.shuffle(d);
      };
      rs.enumerate = [n, n1](const std::function<void(const std::vector<int>&)>& visit) {
        for_each_complete_assignment(n, n1, visit);
      };
      return rs;
    }
    case DesignKind::StratifiedBlock: {
      if (!sample.has_strata())
        throw MismatchError("permutation_test: stratified design needs stratum labels");
      std::map<std::string, std::vector<int>> groups;
      for (int i = 0; i < n; ++i) groups[sample.strata[i]].push_back(i);
      std::vector<std::vector<int>> positions;
      std::vector<std::pair<int, int>> counts;  // (n(x), n1(x))
      rs.total = 1;
      for (const auto& [label, idx] : groups) {
        const int nx = static_cast<int>(idx.size());
        const int n1x = floor_count(design.pi_for(label), nx);
        int observed = 0;
        for (int i : idx) observed += sample.d[i];
        if (n1x != observed)
          throw MismatchError("permutation_test: stratum '" + label +
                              "' treated count does not match the design");
        positions.push_back(idx);
        counts.emplace_back(nx, n1x);
        const long long c = choose(nx, n1x);
        rs.total = (rs.total > kExhaustiveCap / std::max(1LL, c))
                       ? kExhaustiveCap + 1
                       : rs.total * c;
      }
      rs.draw = [positions, counts, n](Rng& rng, std::vector<int>& d) {
        d.assign(n, 0);
        for (std::size_t g = 0; g < positions.size(); ++g) {
          std::vector<int> pattern(counts[g].first, 0);
          std::fill(pattern.begin(), pattern.begin() + counts[g].second, 1);
          rng.shuffle(pattern);
          for (std::size_t j = 0; j < positions[g].size(); ++j)
            d[positions[g][j]] = pattern[j];
        }
      };
      rs.enumerate = [positions, counts, n](
                         const std::function<void(const std::vector<int>&)>& visit) {
        std::vector<std::vector<std::vector<int>>> patterns;
        patterns.reserve(positions.size());
        for (const auto& [nx, n1x] : counts) patterns.push_back(local_patterns(nx, n1x));
        for_each_product_assignment(patterns, positions, n, visit);
      };
      return rs;
    }
    case DesignKind::MatchedPairs: {
      if (!sample.has_pairs())
        throw MismatchError("permutation_test: matched-pairs design needs pair ids");
      std::map<int, std::vector<int>> members;
      for (int i = 0; i < n; ++i) members[sample.pair_ids[i]].push_back(i);
      std::vector<std::pair<int, int>> pairs;
      for (const auto& [id, idx] : members) {
        if (idx.size() != 2 || sample.d[idx[0]] + sample.d[idx[1]] != 1)
          throw MismatchError("permutation_test: pair " + std::to_string(id) +
                              " lacks exactly one treated unit");
        pairs.emplace_back(idx[0], idx[1]);
      }
      const std::size_t num_pairs = pairs.size();
      rs.total = num_pairs < 63 ? (1LL << num_pairs) : kExhaustiveCap + 1;
      rs.draw = [pairs, n](Rng& rng, std::vector<int>& d) {
        d.assign(n, 0);
        for (const auto& [a, b] : pairs) {
          const int coin = static_cast<int>(rng.below(2));
          d[a] = coin;
          d[b] = 1 - coin;
        }
      };
      rs.enumerate = [pairs, n, num_pairs](
                         const std::function<void(const std::vector<int>&)>& visit) {
        std::vector<int> d(n, 0);
        const std::uint64_t total = 1ULL << num_pairs;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
          for (std::size_t j = 0; j < num_pairs; ++j) {
            const int coin = static_cast<int>((mask >> j) & 1ULL);
            d[pairs[j].first] = coin;
            d[pairs[j].second] = 1 - coin;
          }
          visit(d);
        }
      };
      return rs;
    }
    default:
      throw MismatchError("permutation_test: unsupported design '" +
                          design_kind_name(design.kind) + "'");
  }
}

}  // namespace

PermutationResult permutation_test(const Sample& sample, const DesignSpec& design,
                                   const PermutationStatistic& statistic,
                                   const std::string& statistic_name, int B, Rng& rng,
                                   bool exhaustive) {
  ensure_valid(sample);
  Resampler rs = make_resampler(sample, design);

  PermutationResult result;
  result.statistic = statistic_name;
  result.observed = statistic(sample.y, sample.d);

  if (exhaustive) {
    if (rs.total > kExhaustiveCap)
      throw MismatchError("permutation_test: exhaustive mode needs at most 10^6 "
                          "assignments");
    long long at_least = 0;
    result.reference.reserve(static_cast<std::size_t>(rs.total));
    rs.enumerate([&](const std::vector<int>& d) {
      const double value = statistic(sample.y, d);
      result.reference.push_back(value);
      if (value >= result.observed) ++at_least;
    });
    result.exhaustive = true;
    result.draws = rs.total;
    result.p_value = static_cast<double>(at_least) / rs.total;
  } else {
    if (B < 99) throw MismatchError("permutation_test: B must be at least 99");
    long long at_least = 0;
    result.reference.reserve(B);
    std::vector<int> d;
    for (int b = 0; b < B; ++b) {
      rs.draw(rng, d);
      const double value = statistic(sample.y, d);
      result.reference.push_back(value);
      if (value >= result.observed) ++at_least;
    }
    result.draws = B;
    result.p_value = static_cast<double>(1 + at_least) / (B + 1);
  }
  std::sort(result.reference.begin(), result.reference.end());
  return result;
}

PermutationResult permutation_test(const Sample& sample, const DesignSpec& design,
                                   const std::string& statistic, int B, Rng& rng,
                                   bool exhaustive) {
  return permutation_test(sample, design, statistic_by_name(statistic), statistic, B,
                          rng, exhaustive);
}

}  // namespace rct
