#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracle_helpers.hpp"
#include "rct/enumerate.hpp"
#include "rct/errors.hpp"
#include "rct/estimate.hpp"
#include "rct/oracle.hpp"
#include "rct/rng.hpp"

using namespace rct;

namespace {

Sample basic_sample() {
  Sample sample;
  sample.y = {3, 1, 2, 5};
  sample.d = {1, 0, 1, 0};
  sample.x.resize(4, 0);
  return sample;
}

// Stratified sample with guaranteed nonempty arms per stratum.
Sample stratified_sample(Rng& rng, int per_stratum, int strata_count, double effect) {
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
      sample.y[index] = 2.0 * s + rng.normal() + effect * pattern[j];
    }
  }
  return sample;
}

ClusterSample random_clusters(Rng& rng, int count) {
  ClusterSample clusters;
  for (int g = 0; g < count; ++g) {
    clusters.ids.push_back(g);
    const int size = 1 + static_cast<int>(rng.below(6));
    const int sampled = 1 + static_cast<int>(rng.below(size));
    clusters.n_true.push_back(size);
    std::vector<double> members(sampled);
    for (double& value : members) value = rng.normal() + size;
    clusters.members.push_back(std::move(members));
    clusters.d.push_back(g % 2);
  }
  return clusters;
}

}  // namespace

TEST_CASE("least squares on the identity recovers the outcomes") {
  Eigen::VectorXd y(2);
  y << 1, 2;
  const auto fit = least_squares(y, Eigen::MatrixXd::Identity(2, 2), {"c1", "c2"});
  CHECK(fit.coefficients[0] == testref::near(1.0, 1e-12));
  CHECK(fit.coefficients[1] == testref::near(2.0, 1e-12));
}

TEST_CASE("intercept-only least squares is the mean") {
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 10;
  const auto fit = least_squares(y, Eigen::MatrixXd::Ones(5, 1), {"const"});
  CHECK(fit.coefficients[0] == testref::near(4.0, 1e-12));
}

TEST_CASE("least squares matches the normal-equations oracle") {
  Rng rng(31);
  Eigen::MatrixXd columns(8, 3);
  Eigen::VectorXd y(8), weights(8);
  for (int i = 0; i < 8; ++i) {
    columns(i, 0) = 1.0;
    columns(i, 1) = rng.normal();
    columns(i, 2) = rng.normal();
    y[i] = rng.normal() + 2.0 * columns(i, 1);
    weights[i] = 0.5 + rng.uniform01();
  }
  const auto plain = least_squares(y, columns, {"const", "a", "b"});
  const Eigen::VectorXd reference = testref::normal_equations(y, columns);
  for (int j = 0; j < 3; ++j)
    CHECK(plain.coefficients[j] ==
          testref::near(reference[j], 1e-10));

  const auto weighted = least_squares(y, columns, {"const", "a", "b"}, weights);
  const Eigen::VectorXd weighted_reference =
      testref::normal_equations(y, columns, &weights);
  for (int j = 0; j < 3; ++j)
    CHECK(weighted.coefficients[j] ==
          testref::near(weighted_reference[j], 1e-10));

  // Normal equations hold at the solution.
  const Eigen::VectorXd gap =
      columns.transpose() * (y - columns * plain.coefficients);
  CHECK(gap.norm() < 1e-10 * (columns.transpose() * y).norm());
}

TEST_CASE("rank deficiency is an error naming the collinear columns") {
  Eigen::MatrixXd columns(4, 3);
  columns << 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10;  // third = 2 * second
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  CHECK_THROWS_WITH_AS(least_squares(y, columns, {"const", "x1", "x1_copy"}),
                       doctest::Contains("x1"), MismatchError);
}

TEST_CASE("difference in means on the worked example") {
  CHECK(diff_in_means(basic_sample()) == testref::near(-0.5, 1e-15));

  Sample constant = basic_sample();
  constant.y = {4, 4, 4, 4};
  CHECK(diff_in_means(constant) == 0.0);

  Sample empty_arm = basic_sample();
  empty_arm.d = {1, 1, 1, 1};
  CHECK_THROWS_WITH_AS(diff_in_means(empty_arm), doctest::Contains("empty arm"),
                       MismatchError);
}

TEST_CASE("difference in means equals the regression coefficient on treatment") {
  Rng rng(17);
  const Sample sample = testref::random_sample(rng, 20, 0, false, false);
  Eigen::MatrixXd columns(20, 2);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    columns(i, 0) = 1.0;
    columns(i, 1) = sample.d[i];
    y[i] = sample.y[i];
  }
  const auto fit = least_squares(y, columns, {"const", "d"});
  CHECK(diff_in_means(sample) ==
        testref::near(fit.coefficients[1], 1e-10));
}

TEST_CASE("averaging over every assignment recovers the fixed-population effect") {
  Rng rng(23);
  PotentialPopulation population;
  for (int i = 0; i < 6; ++i) {
    population.y1.push_back(rng.normal() + 1.0);
    population.y0.push_back(rng.normal());
  }
  double total = 0.0;
  long long count = 0;
  for_each_complete_assignment(6, 3, [&](const std::vector<int>& d) {
    std::vector<double> y(6);
    for (int i = 0; i < 6; ++i) y[i] = d[i] ? population.y1[i] : population.y0[i];
    total += diff_in_means(y, d);
    ++count;
  });
  CHECK(count == 20);
  CHECK(total / count ==
        testref::near(population.fp_ate(), 1e-12));
}

TEST_CASE("saturated estimator: collapse, identity, and weighting") {
  Rng rng(41);
  Sample single = testref::random_sample(rng, 16, 0, false, false);
  single.strata.assign(16, "only");
  CHECK(saturated_estimate(single) ==
        testref::near(diff_in_means(single), 1e-12));

  // Exact per-stratum share 1/2 makes the saturated and pooled estimators equal.
  Sample balanced = stratified_sample(rng, 10, 3, 1.0);
  CHECK(saturated_estimate(balanced) ==
        testref::near(diff_in_means(balanced), 1e-12));

  // Two strata with known stratum effects 1 and 3 and sizes 30 and 10.
  Sample weighted;
  weighted.x.resize(40, 0);
  for (int i = 0; i < 30; ++i) {
    weighted.strata.push_back("a");
    weighted.d.push_back(i < 15);
    weighted.y.push_back(i < 15 ? 1.0 : 0.0);
  }
  for (int i = 0; i < 10; ++i) {
    weighted.strata.push_back("b");
    weighted.d.push_back(i < 5);
    weighted.y.push_back(i < 5 ? 3.0 : 0.0);
  }
  CHECK(saturated_estimate(weighted) == testref::near(1.5, 1e-12));

  Sample broken = weighted;
  for (int i = 30; i < 40; ++i) broken.d[i] = 0;  // stratum b loses its treated arm
  CHECK_THROWS_WITH_AS(saturated_estimate(broken), doctest::Contains("b"),
                       MismatchError);
}

TEST_CASE("pooled adjustment is inert when X is orthogonal to Y and D") {
  Sample sample;
  sample.y = {3, 1, 3, 1};
  sample.d = {1, 0, 1, 0};
  sample.x.resize(4, 1);
  sample.x << 1, 1, -1, -1;
  CHECK(pooled_adjusted(sample) ==
        testref::near(diff_in_means(sample), 1e-10));
}

TEST_CASE("pooled adjustment matches the normal-equations oracle on fixed data") {
  Rng rng(51);
  Sample sample = testref::random_sample(rng, 8, 1, false, false);
  Eigen::MatrixXd columns(8, 3);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    columns(i, 0) = 1.0;
    columns(i, 1) = sample.d[i];
    columns(i, 2) = sample.x(i, 0);
    y[i] = sample.y[i];
  }
  const Eigen::VectorXd reference = testref::normal_equations(y, columns);
  CHECK(pooled_adjusted(sample) ==
        testref::near(reference[1], 1e-10));
}

TEST_CASE("interacted adjustment rejects a constant covariate") {
  Sample sample = basic_sample();
  sample.x.resize(4, 1);
  sample.x << 2, 2, 2, 2;
  CHECK_THROWS_AS(lin_interacted(sample), MismatchError);
}

TEST_CASE("equal arm slopes collapse the interacted fit onto the pooled fit") {
  Rng rng(61);
  Sample sample = testref::random_sample(rng, 30, 1, false, false);
  // Force exactly equal within-arm slopes by tilting the control outcomes.
  auto arm_slope = [&](int arm) {
    std::vector<int> rows;
    for (int i = 0; i < sample.n(); ++i)
      if (sample.d[i] == arm) rows.push_back(i);
    Eigen::MatrixXd columns(rows.size(), 2);
    Eigen::VectorXd y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      columns(r, 0) = 1.0;
      columns(r, 1) = sample.x(rows[r], 0);
      y[r] = sample.y[rows[r]];
    }
    return testref::normal_equations(y, columns)[1];
  };
  const double tilt = arm_slope(1) - arm_slope(0);
  for (int i = 0; i < sample.n(); ++i)
    if (sample.d[i] == 0) sample.y[i] += tilt * sample.x(i, 0);
  CHECK(arm_slope(1) == testref::near(arm_slope(0), 1e-10));
  CHECK(lin_interacted(sample) ==
        testref::near(pooled_adjusted(sample), 1e-10));
}

TEST_CASE("interacted fit equals the difference of arm intercepts at the mean") {
  Rng rng(71);
  const Sample sample = testref::random_sample(rng, 24, 2, false, false);
  const Eigen::RowVectorXd xbar = sample.x.colwise().mean();
  double intercepts[2];
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<int> rows;
    for (int i = 0; i < sample.n(); ++i)
      if (sample.d[i] == arm) rows.push_back(i);
    Eigen::MatrixXd columns(rows.size(), 3);
    Eigen::VectorXd y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      columns(r, 0) = 1.0;
      columns(r, 1) = sample.x(rows[r], 0) - xbar[0];
      columns(r, 2) = sample.x(rows[r], 1) - xbar[1];
      y[r] = sample.y[rows[r]];
    }
    intercepts[arm] = testref::normal_equations(y, columns)[0];
  }
  CHECK(lin_interacted(sample) ==
        testref::near(intercepts[1] - intercepts[0], 1e-10));
}

TEST_CASE("aipw recovers its named special cases") {
  Rng rng(81);
  Sample sample = testref::random_sample(rng, 20, 1, false, false);
  // Exactly half treated, so pi * n equals the realized treated count.
  REQUIRE(sample.n_treated() == 10);

  CHECK(aipw(sample, 0.5, working_models::arm_mean()) ==
        testref::near(diff_in_means(sample), 1e-12));
  CHECK(aipw(sample, 0.5, working_models::zero()) ==
        testref::near(testref::horvitz_thompson(sample, 0.5), 1e-12));
  CHECK(aipw(sample, 0.5, working_models::linear()) ==
        testref::near(lin_interacted(sample), 1e-10));
  CHECK(!aipw_pi_mismatch(sample, 0.5));
  CHECK(aipw_pi_mismatch(sample, 0.8));
  CHECK_THROWS_AS(aipw(sample, 1.0, working_models::zero()), MismatchError);
}

TEST_CASE("cluster estimators on the worked examples") {
  ClusterSample clusters;
  clusters.ids = {0, 1, 2, 3};
  clusters.n_true = {10, 30, 10, 30};
  clusters.members = {{2.0}, {4.0}, {1.0}, {1.0}};
  clusters.d = {1, 1, 0, 0};
  CHECK(cluster_eq(clusters) == testref::near(2.0, 1e-12));
  CHECK(cluster_size(clusters) == testref::near(2.5, 1e-12));

  ClusterSample equal_sizes = clusters;
  equal_sizes.n_true = {5, 5, 5, 5};
  CHECK(cluster_size(equal_sizes) ==
        testref::near(cluster_eq(equal_sizes), 1e-12));

  ClusterSample one_arm = clusters;
  one_arm.d = {1, 1, 1, 1};
  CHECK_THROWS_AS(cluster_eq(one_arm), MismatchError);
}

TEST_CASE("singleton clusters reduce to the individual difference in means") {
  Rng rng(91);
  ClusterSample clusters;
  Sample flat;
  flat.x.resize(12, 0);
  for (int g = 0; g < 12; ++g) {
    clusters.ids.push_back(g);
    clusters.n_true.push_back(1);
    const double y = rng.normal();
    clusters.members.push_back({y});
    clusters.d.push_back(g % 2);
    flat.y.push_back(y);
    flat.d.push_back(g % 2);
  }
  CHECK(cluster_eq(clusters) ==
        testref::near(diff_in_means(flat), 1e-12));
}

TEST_CASE("size-weighted estimator equals the weighted regression coefficient") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const ClusterSample clusters = random_clusters(rng, 10);
    long rows = 0;
    for (int g = 0; g < clusters.size(); ++g) rows += clusters.m(g);
    Eigen::MatrixXd columns(rows, 2);
    Eigen::VectorXd y(rows), weights(rows);
    long r = 0;
    for (int g = 0; g < clusters.size(); ++g)
      for (double value : clusters.members[g]) {
        columns(r, 0) = 1.0;
        columns(r, 1) = clusters.d[g];
        y[r] = value;
        weights[r] = static_cast<double>(clusters.n_true[g]) / clusters.m(g);
        ++r;
      }
    const auto fit = least_squares(y, columns, {"const", "d"}, weights);
    CHECK(cluster_size(clusters) ==
          testref::near(fit.coefficients[1], 1e-10));
  }
}

TEST_CASE("estimators are location-scale equivariant and order invariant") {
  Rng rng(111);
  for (int trial = 0; trial < 10; ++trial) {
    Sample sample = testref::random_sample(rng, 24, 2, false, false);
    const double base_dim = diff_in_means(sample);
    const double base_pooled = pooled_adjusted(sample);
    const double base_lin = lin_interacted(sample);

    Sample shifted = sample;
    for (double& y : shifted.y) y = 3.0 * y + 7.0;
    CHECK(diff_in_means(shifted) ==
          testref::near(3.0 * base_dim, 1e-9));
    CHECK(pooled_adjusted(shifted) ==
          testref::near(3.0 * base_pooled, 1e-9));
    CHECK(lin_interacted(shifted) ==
          testref::near(3.0 * base_lin, 1e-9));

    // Reverse the unit order.
    Sample reversed = sample;
    std::reverse(reversed.y.begin(), reversed.y.end());
    std::reverse(reversed.d.begin(), reversed.d.end());
    reversed.x = sample.x.colwise().reverse().eval();
    CHECK(diff_in_means(reversed) == testref::near(base_dim, 1e-9));
    CHECK(pooled_adjusted(reversed) ==
          testref::near(base_pooled, 1e-9));
    CHECK(lin_interacted(reversed) ==
          testref::near(base_lin, 1e-9));
  }
}

TEST_CASE("pooled adjustment can hurt precision while interacted cannot") {
  Dgp dgp;
  DiscreteX dx;
  dx.values = {-1.0, 1.0};
  dx.probs = {0.5, 0.5};
  dx.mean1 = {-1.0, 3.0};  // slope +2, effect 1 at the mean
  dx.mean0 = {2.0, -2.0};  // slope -2
  dx.sd1 = {0.5, 0.5};
  dx.sd0 = {0.5, 0.5};
  dgp.x = dx;

  McScenario scenario;
  scenario.dgp = dgp;
  scenario.design = DesignKind::Complete;
  scenario.pi = 0.8;
  scenario.n = 300;
  scenario.replications = 2000;
  scenario.seed = 2024;
  scenario.variance = "robust";

  scenario.estimator = "dim";
  const McReport dim_report = monte_carlo(scenario);
  scenario.estimator = "pooled";
  scenario.variance = "pooled-robust";
  const McReport pooled_report = monte_carlo(scenario);
  scenario.estimator = "lin";
  scenario.variance = "influence";
  const McReport lin_report = monte_carlo(scenario);

  const double spread = std::sqrt(dim_report.mcse_emp_variance *
                                      dim_report.mcse_emp_variance +
                                  pooled_report.mcse_emp_variance *
                                      pooled_report.mcse_emp_variance);
  CHECK(pooled_report.emp_variance - dim_report.emp_variance > 2.5 * spread);
  CHECK(dim_report.emp_variance - lin_report.emp_variance > 2.5 * spread);
}
