#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rct/estimate.hpp"
#include "rct/model.hpp"

namespace rct {

// Sample variance with denominator (count - 1).
double sample_variance(const std::vector<double>& values);

// s1^2/n1 + s0^2/n0 with arm sample variances. Consistent for V/n under
// complete randomization; conservative under stratified designs.
double arm_robust_variance(const Sample& sample);
double arm_robust_variance(const std::vector<double>& y, const std::vector<int>& d);

// Finite-population upper bound on Var of the difference in means. The plain
// bound sets the treatment-effect variance term to zero; the improved bound
// subtracts (s1 - s0)^2 / N.
double finite_pop_bound(const Sample& sample, long population_size, bool improved);

// Consistent variance of the estimator under stratified block randomization:
// within-stratum arm variances at the design shares plus the between-stratum
// spread of stratum effects around the saturated estimate.
double sbr_variance(const Sample& sample,
                    const std::map<std::string, double>& pi_by_stratum);

// Design-based variant: omits the between-stratum term. Valid only when the
// sample is the whole population of interest.
double design_based_strat_variance(const Sample& sample,
                                   const std::map<std::string, double>& pi_by_stratum);

// Pair ids ordered by covariate proximity (the ordering match_pairs produces;
// falls back to pair-id order when the sample has no covariates).
std::vector<int> pair_proximity_order(const Sample& sample);

// Collapsed-strata variance for matched-pairs experiments at share 1/2:
//   (1/n) [ 2 var(Y|D=1) + 2 var(Y|D=0) - max(0, lambda - m^2) ]
// where m is the mean pair sum and lambda averages products of pair sums over
// adjacent pairs of pairs in the given proximity order; an odd leftover pair
// is dropped from lambda only.
double matched_pairs_variance(const Sample& sample);
double matched_pairs_variance(const Sample& sample, const std::vector<int>& pair_order);

// arm_robust_variance applied to cluster-average outcomes.
double cluster_eq_variance(const ClusterSample& clusters);

// Variance for the size-weighted estimator: arm_robust_variance of the
// rescaled outcomes Yhat_g. When the clusters carry strata, subtracts the
// between-stratum correction at share pi (realized share when omitted).
double cluster_size_variance(const ClusterSample& clusters,
                             std::optional<double> pi = std::nullopt);

// point +/- z_{(1+level)/2} * sqrt(variance).
std::pair<double, double> confidence_interval(double point, double variance,
                                              double level);

// Heteroskedasticity-robust (HC2) variance of the D coefficient in the
// pooled regression of Y on (constant, D, X).
double pooled_robust_variance(const Sample& sample);

// Variance for AIPW-style adjusted estimators: arm variances of the working
// model residuals at the design shares plus the spread of the fitted
// treatment-effect function.
double adjusted_influence_variance(const Sample& sample, double pi,
                                   const FittedWorkingModel& fitted);

// The most specific valid variance method for an estimator/design combination
// ("auto" resolution): stratified data -> sbr, pairs -> pairs, clusters ->
// the matching cluster method, adjusted estimators -> their own formulas,
// otherwise the arm-robust estimator.
std::string auto_variance_method(const std::string& estimator, bool has_strata,
                                 bool has_pairs, bool is_cluster);

}  // namespace rct
