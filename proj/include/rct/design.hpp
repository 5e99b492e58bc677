#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rct/model.hpp"
#include "rct/rng.hpp"

namespace rct {

// Treated count under an assignment share: floor(pi * n), guarded against
// floating-point representation of the product.
int floor_count(double pi, int n);

// Complete randomization: exactly floor(pi*n) treated, uniform over all such
// vectors (a fixed vector of ones is uniformly permuted).
Assignment assign_complete(int n, double pi, Rng& rng);

// Complete randomization run independently within each stratum at that
// stratum's own share. Every observed label must appear in the map or the
// DesignSpec-style fallback share must be supplied via the map's entries.
Assignment assign_stratified_block(const std::vector<std::string>& strata,
                                   const std::map<std::string, double>& pi_by_stratum,
                                   Rng& rng);

// Scalar ordering score used for pairing: the covariate itself for k = 1,
// the score on the first principal direction (sign pinned) for k > 1.
Eigen::VectorXd proximity_scores(const Eigen::MatrixXd& covariates);

// Pair units by covariate proximity. For k = 1 units are sorted by the
// covariate and paired consecutively; for k > 1 units are sorted by their
// score on the first principal direction. Ties break on the original index,
// so the result is deterministic. The returned list is ordered so adjacent
// pairs are similar, which the collapsed-strata variance estimator requires.
std::vector<std::pair<int, int>> match_pairs(const Eigen::MatrixXd& covariates);

// Independently for each pair, one unit is treated with probability 1/2.
Assignment assign_matched_pairs(const std::vector<std::pair<int, int>>& pairing,
                                Rng& rng);

// Cluster-level assignment: complete or stratified-block randomization with
// the clusters as the experimental units. The returned d is cluster-level.
Assignment assign_clusters(const ClusterSample& clusters, const DesignSpec& spec,
                           Rng& rng);

// Imb(x) = #treated with X = x minus #untreated with X = x.
std::map<std::string, int> imbalance(const std::vector<int>& d,
                                     const std::vector<std::string>& strata);

// Same, but over an explicit label universe; labels without units map to 0.
std::map<std::string, int> imbalance(const std::vector<int>& d,
                                     const std::vector<std::string>& strata,
                                     const std::vector<std::string>& labels);

}  // namespace rct
