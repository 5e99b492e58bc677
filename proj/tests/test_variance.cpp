#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracle_helpers.hpp"
#include "rct/design.hpp"
#include "rct/enumerate.hpp"
#include "rct/errors.hpp"
#include "rct/estimate.hpp"
#include "rct/oracle.hpp"
#include "rct/variance.hpp"

using namespace rct;

namespace {

Sample stratified_even_sample(Rng& rng, int per_stratum, int strata_count,
                              double stratum_gap) {
  Sample sample;
  const int n = per_stratum * strata_count;
  sample.y.resize(n);
  sample.d.resize(n);
  sample.x.resize(n, 0);
  sample.strata.resize(n);
  int index = 0;
  for (int s = 0; s < strata_count; ++s) {
    std::vector<int> pattern(per_stratum, 0);
    std::fill(pattern.begin(), pattern.begin() + per_stratum / 2, 1);
    rng.shuffle(pattern);
    for (int j = 0; j < per_stratum; ++j, ++index) {
      sample.strata[index] = "s" + std::to_string(s);
      sample.d[index] = pattern[j];
      sample.y[index] = stratum_gap * s + rng.normal() + 0.5 * pattern[j];
    }
  }
  return sample;
}

std::map<std::string, double> realized_shares(const Sample& sample) {
  std::map<std::string, std::pair<int, int>> counts;
  for (int i = 0; i < sample.n(); ++i) {
    ++counts[sample.strata[i]].first;
    counts[sample.strata[i]].second += sample.d[i];
  }
  std::map<std::string, double> shares;
  for (const auto& [label, cell] : counts)
    shares[label] = static_cast<double>(cell.second) / cell.first;
  return shares;
}

Sample pairs_sample_from(const std::vector<double>& treated,
                         const std::vector<double>& control) {
  Sample sample;
  const int pairs = static_cast<int>(treated.size());
  sample.x.resize(2 * pairs, 0);
  for (int j = 0; j < pairs; ++j) {
    sample.y.push_back(treated[j]);
    sample.d.push_back(1);
    sample.pair_ids.push_back(j);
    sample.y.push_back(control[j]);
    sample.d.push_back(0);
    sample.pair_ids.push_back(j);
  }
  return sample;
}

}  // namespace

TEST_CASE("arm-robust variance on the worked example") {
  Sample sample;
  sample.y = {0, 2, 1, 1};
  sample.d = {1, 1, 0, 0};
  sample.x.resize(4, 0);
  CHECK(arm_robust_variance(sample) == testref::near(1.0, 1e-14));

  sample.y = {5, 5, 5, 5};
  CHECK(arm_robust_variance(sample) == 0.0);

  sample.d = {1, 0, 0, 0};
  CHECK_THROWS_AS(arm_robust_variance(sample), MismatchError);
}

TEST_CASE("scaled arm-robust variance approaches the complete-randomization limit") {
  Dgp dgp;
  DiscreteX dx;
  dx.values = {0.0, 1.0};
  dx.probs = {0.5, 0.5};
  dx.mean1 = {1.0, 3.0};
  dx.mean0 = {0.0, 1.0};
  dx.sd1 = {1.0, 1.0};
  dx.sd0 = {1.0, 1.0};
  dgp.x = dx;
  const TheoreticalVariances tv = theoretical_variances(dgp, 0.5);

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::Complete;
  scenario.pi = 0.5;
  scenario.estimator = "dim";
  scenario.variance = "robust";
  scenario.n = 10000;
  scenario.replications = 100;
  scenario.seed = 99;
  const McReport report = monte_carlo(scenario);
  CHECK(scenario.n * report.mean_variance_estimate ==
        doctest::Approx(tv.v_cr).epsilon(0.05));
}

TEST_CASE("finite-population bound and its improved version") {
  Sample sample;
  sample.y = {0, 2, 1, 3};  // both arms have variance 2
  sample.d = {1, 1, 0, 0};
  sample.x.resize(4, 0);
  CHECK(finite_pop_bound(sample, 4, false) ==
        testref::near(finite_pop_bound(sample, 4, true), 1e-14));

  sample.y = {0, 2, 1, 1.5};
  CHECK(finite_pop_bound(sample, 4, true) < finite_pop_bound(sample, 4, false));
  CHECK_THROWS_AS(finite_pop_bound(sample, 3, false), MismatchError);
}

TEST_CASE("averaged bound matches the enumerated design variance exactly") {
  Rng rng(7);
  for (bool constant_effects : {true, false}) {
    PotentialPopulation population;
    for (int i = 0; i < 6; ++i) {
      const double y0 = rng.normal();
      population.y0.push_back(y0);
      population.y1.push_back(constant_effects ? y0 + 2.0 : y0 + 2.0 + rng.normal());
    }
    const CompleteEnumeration enumeration = enumerate_complete(population, 3);
    double mean_bound = 0.0;
    for_each_complete_assignment(6, 3, [&](const std::vector<int>& d) {
      Sample sample;
      sample.d = d;
      sample.x.resize(6, 0);
      for (int i = 0; i < 6; ++i)
        sample.y.push_back(d[i] ? population.y1[i] : population.y0[i]);
      mean_bound += finite_pop_bound(sample, 6, false);
    });
    mean_bound /= enumeration.assignments;
    if (constant_effects) {
      CHECK(mean_bound == testref::near(enumeration.variance, 1e-12));
    } else {
      CHECK(mean_bound > enumeration.variance + 1e-9);
    }
  }
}

TEST_CASE("one stratum collapses the stratified variance onto the robust one") {
  Rng rng(15);
  Sample sample = testref::random_sample(rng, 21, 0, false, false);
  sample.strata.assign(21, "only");
  const double stratified = sbr_variance(sample, realized_shares(sample));
  const double robust = arm_robust_variance(sample);
  CHECK(std::fabs(stratified / robust - 1.0) <= 2.0 / sample.n());
}

TEST_CASE("stratified variance tracks its large-sample value under strong strata") {
  Dgp dgp;
  DiscreteX dx;
  dx.values = {0.0, 1.0};
  dx.probs = {0.5, 0.5};
  dx.mean1 = {1.0, 6.0};
  dx.mean0 = {0.0, 4.0};
  dx.sd1 = {1.0, 1.0};
  dx.sd0 = {1.0, 1.0};
  dgp.x = dx;
  const TheoreticalVariances tv = theoretical_variances(dgp, 0.5);

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::StratifiedBlock;
  scenario.pi = 0.5;
  scenario.estimator = "dim";
  scenario.variance = "sbr";
  scenario.n = 10000;
  scenario.replications = 100;
  scenario.seed = 5;
  const McReport report = monte_carlo(scenario);
  CHECK(scenario.n * report.mean_variance_estimate ==
        doctest::Approx(tv.v_sbr).epsilon(0.05));
}

TEST_CASE("an irrelevant stratification variable changes nothing asymptotically") {
  Dgp dgp;
  DiscreteX dx;
  dx.values = {0.0, 1.0};
  dx.probs = {0.5, 0.5};
  dx.mean1 = {2.0, 2.0};
  dx.mean0 = {1.0, 1.0};
  dx.sd1 = {1.0, 1.0};
  dx.sd0 = {1.0, 1.0};
  dgp.x = dx;

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::StratifiedBlock;
  scenario.pi = 0.5;
  scenario.estimator = "dim";
  scenario.n = 4000;
  scenario.replications = 100;
  scenario.seed = 8;
  scenario.variance = "sbr";
  const McReport stratified = monte_carlo(scenario);
  scenario.variance = "robust";
  const McReport robust = monte_carlo(scenario);
  CHECK(stratified.mean_variance_estimate / robust.mean_variance_estimate ==
        doctest::Approx(1.0).epsilon(0.07));
}

TEST_CASE("the design-based stratified variance never exceeds the full one") {
  Rng rng(25);
  for (int trial = 0; trial < 30; ++trial) {
    const Sample sample = stratified_even_sample(rng, 8, 3, 2.0);
    const auto shares = realized_shares(sample);
    CHECK(design_based_strat_variance(sample, shares) <=
          sbr_variance(sample, shares) + 1e-15);
  }
}

TEST_CASE("the two stratified variances agree when stratum effects are equal") {
  Sample sample;
  sample.x.resize(8, 0);
  // Two strata with identical within-stratum effect estimates.
  const double y[] = {1, 0, 2, 1, 5, 4, 6, 5};
  for (int i = 0; i < 8; ++i) {
    sample.y.push_back(y[i]);
    sample.d.push_back(i % 2 == 0);
    sample.strata.push_back(i < 4 ? "a" : "b");
  }
  const auto shares = realized_shares(sample);
  CHECK(design_based_strat_variance(sample, shares) ==
        testref::near(sbr_variance(sample, shares), 1e-12));
}

TEST_CASE("on average the design-based estimator stays above the exact variance") {
  Rng rng(35);
  PotentialPopulation population;
  std::vector<std::string> strata;
  for (int i = 0; i < 8; ++i) {
    const double y0 = rng.normal();
    population.y0.push_back(y0);
    population.y1.push_back(y0 + 1.0 + rng.normal());  // heterogeneous effects
    strata.push_back(i < 4 ? "a" : "b");
  }

  // Exact design variance of the saturated estimator: per-stratum
  // finite-population formulas, strata independent.
  double exact = 0.0;
  for (int s = 0; s < 2; ++s) {
    const int offset = 4 * s;
    double mean1 = 0, mean0 = 0;
    for (int i = 0; i < 4; ++i) {
      mean1 += population.y1[offset + i] / 4;
      mean0 += population.y0[offset + i] / 4;
    }
    double s1 = 0, s0 = 0, sd = 0;
    for (int i = 0; i < 4; ++i) {
      s1 += std::pow(population.y1[offset + i] - mean1, 2) / 3;
      s0 += std::pow(population.y0[offset + i] - mean0, 2) / 3;
      sd += std::pow(population.y1[offset + i] - population.y0[offset + i] -
                         (mean1 - mean0),
                     2) /
            3;
    }
    exact += 0.25 * (s1 / 2 + s0 / 2 - sd / 4);
  }

  // Enumerate the 36 stratified assignments; check the enumeration against
  // the closed form, then compare the estimator's average to the exact value.
  const auto patterns = local_patterns(4, 2);
  double mean_estimate = 0.0, mean_sat = 0.0, mean_sat_sq = 0.0;
  int count = 0;
  for (const auto& pattern_a : patterns) {
    for (const auto& pattern_b : patterns) {
      Sample sample;
      sample.x.resize(8, 0);
      sample.strata = strata;
      std::vector<int> d;
      for (int i = 0; i < 4; ++i) d.push_back(pattern_a[i]);
      for (int i = 0; i < 4; ++i) d.push_back(pattern_b[i]);
      sample.d = d;
      for (int i = 0; i < 8; ++i)
        sample.y.push_back(d[i] ? population.y1[i] : population.y0[i]);
      const double sat = saturated_estimate(sample);
      mean_sat += sat;
      mean_sat_sq += sat * sat;
      mean_estimate += design_based_strat_variance(sample, {{"a", 0.5}, {"b", 0.5}});
      ++count;
    }
  }
  mean_estimate /= count;
  mean_sat /= count;
  const double enumerated_variance = mean_sat_sq / count - mean_sat * mean_sat;
  CHECK(enumerated_variance == testref::near(exact, 1e-12));
  CHECK(mean_estimate > exact + 1e-9);
}

TEST_CASE("matched-pairs variance on a fully worked example") {
  // Pair sums are (2, 2, 4, 4), so the pairs-of-pairs average is 10.
  const Sample sample = pairs_sample_from({1.5, 1.0, 2.5, 1.0}, {0.5, 1.0, 1.5, 3.0});
  // 2*var(Y|D=1) + 2*var(Y|D=0) - max(0, 10 - 3^2), all over n = 8.
  const double expected = (2 * 0.5 + 2 * (3.5 / 3) - 1.0) / 8.0;
  CHECK(matched_pairs_variance(sample) ==
        testref::near(expected, 1e-12));

  Sample too_few = pairs_sample_from({1, 2, 3}, {0, 0, 0});
  CHECK_THROWS_WITH_AS(matched_pairs_variance(too_few),
                       doctest::Contains("too few pairs"), MismatchError);

  Sample broken = sample;
  broken.d[0] = 0;  // pair 0 now has two controls
  CHECK_THROWS_AS(matched_pairs_variance(broken), DataError);
}

TEST_CASE("matched-pairs variance is consistent for the true design variance") {
  // Outcomes strongly driven by X: the subtraction must remove the X part,
  // pinning the estimator's scaling constant.
  Dgp dgp;
  UniformX ux;
  ux.mean1 = Poly{{1.0, 10.0}};
  ux.mean0 = Poly{{0.0, 10.0}};
  ux.sd1 = Poly{{1.0}};
  ux.sd0 = Poly{{1.0}};
  dgp.x = ux;

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::MatchedPairs;
  scenario.estimator = "dim";
  scenario.variance = "pairs";
  scenario.n = 1200;
  scenario.replications = 1500;
  scenario.seed = 12;
  const McReport report = monte_carlo(scenario);
  // True scaled variance is 4 sigma^2 = 4 (the X contribution cancels).
  CHECK(scenario.n * report.emp_variance == doctest::Approx(4.0).epsilon(0.15));
  CHECK(report.mean_variance_estimate / report.emp_variance ==
        doctest::Approx(1.0).epsilon(0.12));
}

TEST_CASE("perfect pairing on a deterministic outcome drives the variance to zero") {
  Dgp dgp;
  UniformX ux;
  ux.mean1 = Poly{{2.0, 1.0}};  // x + 2
  ux.mean0 = Poly{{0.0, 1.0}};  // x
  ux.sd1 = Poly{{0.0}};
  ux.sd0 = Poly{{0.0}};
  dgp.x = ux;

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::MatchedPairs;
  scenario.estimator = "dim";
  scenario.variance = "pairs";
  scenario.n = 4000;
  scenario.replications = 100;
  scenario.seed = 14;
  const McReport report = monte_carlo(scenario);
  CHECK(scenario.n * report.mean_variance_estimate < 0.05);
  CHECK(scenario.n * report.emp_variance < 0.05);
}

TEST_CASE("without a stratification signal the pairs and robust variances agree") {
  Dgp dgp;
  UniformX ux;
  ux.mean1 = Poly{{2.0}};
  ux.mean0 = Poly{{1.0}};
  ux.sd1 = Poly{{1.0}};
  ux.sd0 = Poly{{1.0}};
  dgp.x = ux;

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::MatchedPairs;
  scenario.estimator = "dim";
  scenario.n = 1000;
  scenario.replications = 500;
  scenario.seed = 16;
  scenario.variance = "pairs";
  const McReport pairs_report = monte_carlo(scenario);
  scenario.variance = "robust";
  const McReport robust_report = monte_carlo(scenario);
  CHECK(pairs_report.mean_variance_estimate / robust_report.mean_variance_estimate ==
        doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("cluster variances: collapse, zero, and the sandwich equivalence") {
  Rng rng(45);
  ClusterSample singletons;
  for (int g = 0; g < 10; ++g) {
    singletons.ids.push_back(g);
    singletons.n_true.push_back(1);
    singletons.members.push_back({rng.normal()});
    singletons.d.push_back(g % 2);
  }
  std::vector<double> flat;
  for (int g = 0; g < 10; ++g) flat.push_back(singletons.members[g][0]);
  CHECK(cluster_eq_variance(singletons) ==
        testref::near(arm_robust_variance(flat, singletons.d), 1e-14));

  ClusterSample constant;
  for (int g = 0; g < 8; ++g) {
    constant.ids.push_back(g);
    constant.n_true.push_back(2);
    constant.members.push_back({g % 2 ? 3.0 : 1.0});
    constant.d.push_back(g % 2);
  }
  CHECK(cluster_eq_variance(constant) == 0.0);

  // Equal true sizes with fully sampled clusters: the size-weighted variance
  // reduces to the cluster-average one.
  ClusterSample equal_sizes;
  for (int g = 0; g < 12; ++g) {
    equal_sizes.ids.push_back(g);
    equal_sizes.n_true.push_back(3);
    equal_sizes.members.push_back({rng.normal(), rng.normal(), rng.normal()});
    equal_sizes.d.push_back(g % 2);
  }
  CHECK(cluster_size_variance(equal_sizes) ==
        testref::near(cluster_eq_variance(equal_sizes), 1e-10));

  // Arm-balanced singleton-sample data: the rescaled-outcome estimator and
  // the CR1 cluster-robust sandwich of the weighted regression coincide.
  ClusterSample balanced;
  const int treated_sizes[] = {1, 9, 5, 5, 3, 7};
  const int control_sizes[] = {9, 1, 5, 5, 7, 3};
  for (int g = 0; g < 6; ++g) {
    balanced.ids.push_back(g);
    balanced.n_true.push_back(treated_sizes[g]);
    balanced.members.push_back({rng.normal() + treated_sizes[g]});
    balanced.d.push_back(1);
  }
  for (int g = 0; g < 6; ++g) {
    balanced.ids.push_back(6 + g);
    balanced.n_true.push_back(control_sizes[g]);
    balanced.members.push_back({rng.normal()});
    balanced.d.push_back(0);
  }
  const double ours = cluster_size_variance(balanced);
  const double sandwich = testref::cluster_robust_wls_variance(balanced);
  CHECK(ours == doctest::Approx(sandwich).epsilon(1e-8));
}

TEST_CASE("scaled cluster variances approach their large-G values") {
  ClusterDgp dgp;
  dgp.sizes = {1, 9};
  dgp.probs = {0.5, 0.5};
  dgp.mean1 = {1.0, 9.0};
  dgp.mean0 = {0.0, 0.0};
  dgp.sd1 = dgp.sd0 = 1.0;
  dgp.sampled = 1;

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::ClusterComplete;
  scenario.pi = 0.5;
  scenario.n = 10000;
  scenario.replications = 100;
  scenario.seed = 18;

  scenario.estimator = "cluster-eq";
  scenario.variance = "cluster-eq";
  const McReport eq_report = monte_carlo(scenario);
  CHECK(scenario.n * eq_report.mean_variance_estimate ==
        doctest::Approx(dgp.v_eq(0.5)).epsilon(0.05));

  scenario.estimator = "cluster-size";
  scenario.variance = "cluster-size";
  const McReport size_report = monte_carlo(scenario);
  CHECK(scenario.n * size_report.mean_variance_estimate ==
        doctest::Approx(dgp.v_size(0.5)).epsilon(0.05));
}

TEST_CASE("stratified cluster-size variance subtracts a nonnegative correction") {
  Rng rng(55);
  ClusterSample clusters;
  for (int g = 0; g < 24; ++g) {
    clusters.ids.push_back(g);
    const int size = 1 + static_cast<int>(rng.below(5));
    clusters.n_true.push_back(size);
    clusters.members.push_back({rng.normal() + size});
    clusters.strata.push_back(g % 2 ? "big" : "small");
  }
  // Two treated and two controls per stratum at least.
  for (int g = 0; g < 24; ++g) clusters.d.push_back((g / 2) % 2);
  const double with_strata = cluster_size_variance(clusters, 0.5);
  ClusterSample no_strata = clusters;
  no_strata.strata.clear();
  CHECK(with_strata <= cluster_size_variance(no_strata) + 1e-15);
}

TEST_CASE("confidence intervals use an accurate normal quantile") {
  const auto [lo, hi] = confidence_interval(1.0, 0.25, 0.95);
  CHECK(lo == testref::near(0.02, 1e-3));
  CHECK(hi == testref::near(1.98, 1e-3));

  const auto degenerate = confidence_interval(2.0, 0.0, 0.95);
  CHECK(degenerate.first == 2.0);
  CHECK(degenerate.second == 2.0);

  CHECK(normal_quantile(0.95) == testref::near(1.6449, 1e-4));
  CHECK_THROWS_AS(confidence_interval(0.0, -1.0, 0.95), MismatchError);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 1.0), MismatchError);
}

TEST_CASE("variance estimators are nonnegative and scale quadratically") {
  Rng rng(65);
  for (int trial = 0; trial < 20; ++trial) {
    Sample sample = stratified_even_sample(rng, 8, 2, 1.5);
    const auto shares = realized_shares(sample);
    const double robust = arm_robust_variance(sample);
    const double stratified = sbr_variance(sample, shares);
    CHECK(robust >= 0.0);
    CHECK(stratified >= 0.0);

    Sample scaled = sample;
    for (double& y : scaled.y) y *= -2.5;
    CHECK(arm_robust_variance(scaled) ==
          doctest::Approx(6.25 * robust).epsilon(1e-9));
    CHECK(sbr_variance(scaled, shares) ==
          doctest::Approx(6.25 * stratified).epsilon(1e-9));
  }
  for (int trial = 0; trial < 20; ++trial) {
    Sample sample = testref::random_sample(rng, 16, 1, false, true);
    const double pairs = matched_pairs_variance(sample);
    CHECK(pairs >= 0.0);
    Sample scaled = sample;
    for (double& y : scaled.y) y *= 3.0;
    CHECK(matched_pairs_variance(scaled) == doctest::Approx(9.0 * pairs).epsilon(1e-9));
  }
}

TEST_CASE("refining predictive strata does not inflate the variance estimate") {
  DiscreteX fine;
  fine.values = {0.0, 1.0, 2.0, 3.0};
  fine.probs = {0.25, 0.25, 0.25, 0.25};
  fine.mean1 = {1.0, 3.0, 5.0, 7.0};
  fine.mean0 = {0.0, 2.0, 4.0, 6.0};
  fine.sd1 = {1.0, 1.0, 1.0, 1.0};
  fine.sd0 = {1.0, 1.0, 1.0, 1.0};

  DiscreteX coarse = fine;
  coarse.strata = {"lo", "lo", "hi", "hi"};

  McScenario scenario;
  scenario.design = DesignKind::StratifiedBlock;
  scenario.pi = 0.5;
  scenario.estimator = "dim";
  scenario.variance = "sbr";
  scenario.n = 2000;
  scenario.replications = 100;
  scenario.seed = 77;

  Dgp fine_dgp;
  fine_dgp.x = fine;
  scenario.dgp = fine_dgp;
  const McReport fine_report = monte_carlo(scenario);

  Dgp coarse_dgp;
  coarse_dgp.x = coarse;
  scenario.dgp = coarse_dgp;
  const McReport coarse_report = monte_carlo(scenario);

  CHECK(fine_report.mean_variance_estimate <=
        1.1 * coarse_report.mean_variance_estimate);
}

TEST_CASE("the pooled sandwich tracks the pooled large-sample variance") {
  Dgp dgp;
  DiscreteX dx;
  dx.values = {-1.0, 1.0};
  dx.probs = {0.5, 0.5};
  dx.mean1 = {-1.0, 3.0};
  dx.mean0 = {2.0, -2.0};
  dx.sd1 = {0.5, 0.5};
  dx.sd0 = {0.5, 0.5};
  dgp.x = dx;
  const TheoreticalVariances tv = theoretical_variances(dgp, 0.8);

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::Complete;
  scenario.pi = 0.8;
  scenario.estimator = "pooled";
  scenario.variance = "pooled-robust";
  scenario.n = 2000;
  scenario.replications = 800;
  scenario.seed = 20;
  const McReport report = monte_carlo(scenario);
  CHECK(scenario.n * report.mean_variance_estimate ==
        doctest::Approx(tv.v_pool).epsilon(0.1));
  CHECK(scenario.n * report.emp_variance == doctest::Approx(tv.v_pool).epsilon(0.15));
}

TEST_CASE("the influence-style variance tracks the interacted large-sample value") {
  // Quadratic conditional mean, so the linear working model is misspecified
  // and the correction terms matter.
  Dgp dgp;
  DiscreteX dx;
  dx.values = {0.0, 1.0, 4.0};
  dx.probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  dx.mean1 = {0.0, 1.0, 16.0};
  dx.mean0 = {0.0, 0.0, 0.0};
  dx.sd1 = {0.5, 0.5, 0.5};
  dx.sd0 = {0.5, 0.5, 0.5};
  dgp.x = dx;
  const TheoreticalVariances tv = theoretical_variances(dgp, 0.5);

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::Complete;
  scenario.pi = 0.5;
  scenario.estimator = "lin";
  scenario.variance = "influence";
  scenario.n = 2000;
  scenario.replications = 800;
  scenario.seed = 22;
  const McReport report = monte_carlo(scenario);
  CHECK(scenario.n * report.emp_variance == doctest::Approx(tv.v_sat).epsilon(0.15));
  CHECK(scenario.n * report.mean_variance_estimate ==
        doctest::Approx(tv.v_sat).epsilon(0.1));
}
