#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rct/model.hpp"
#include "rct/rng.hpp"

namespace rct {

struct PermutationResult {
  double p_value = 1.0;
  double observed = 0.0;
  std::vector<double> reference;  // resampled statistics, sorted ascending
  bool exhaustive = false;
  long long draws = 0;            // B, or the exhaustive assignment count
  std::string statistic;
};

// Statistic evaluated on the observed outcomes under a candidate assignment.
using PermutationStatistic =
    std::function<double(const std::vector<double>& y, const std::vector<int>& d)>;

// Randomization test of the sharp null that every unit's potential outcomes
// coincide. Assignments are redrawn from the declared design's distribution
// (within strata for stratified block designs, within pairs for matched
// pairs), with p = (1 + #{resampled >= observed}) / (B + 1). Exhaustive mode
// walks all assignments (offered while their count stays at or below 10^6)
// and is deterministic and seed-free.
PermutationResult permutation_test(const Sample& sample, const DesignSpec& design,
                                   const std::string& statistic, int B, Rng& rng,
                                   bool exhaustive = false);

// Same, with a caller-supplied statistic.
PermutationResult permutation_test(const Sample& sample, const DesignSpec& design,
                                   const PermutationStatistic& statistic,
                                   const std::string& statistic_name, int B, Rng& rng,
                                   bool exhaustive = false);

// Named statistics: "dim" = |difference in means|, "dim-studentized" =
// |difference in means| / sqrt(arm-robust variance).
PermutationStatistic statistic_by_name(const std::string& name);

}  // namespace rct
