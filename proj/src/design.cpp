#include "rct/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rct/errors.hpp"

namespace rct {

int floor_count(double pi, int n) {
  // The 1e-9 nudge keeps e.g. 0.3 * 10 == 2.9999999999999996 from flooring
  // one short of the intended count.
  return static_cast<int>(std::floor(pi * n + 1e-9));
}

namespace {

std::vector<int> complete_pattern(int n, int n1, Rng& rng) {
  std::vector<int> d(n, 0);
  std::fill(d.begin(), d.begin() + n1, 1);
  rng.shuffle(d);
  return d;
}

}  // namespace

Assignment assign_complete(int n, double pi, Rng& rng) {
  if (n < 2) throw MismatchError("assign_complete: need at least 2 units");
  const int n1 = floor_count(pi, n);
  if (n1 < 1 || n1 > n - 1)
    throw MismatchError("degenerate design: floor(pi*n) = " + std::to_string(n1) +
                        " with n = " + std::to_string(n));
  Assignment a;
  a.d = complete_pattern(n, n1, rng);
  a.design.kind = DesignKind::Complete;
  a.design.pi = pi;
  return a;
}

Assignment assign_stratified_block(const std::vector<std::string>& strata,
                                   const std::map<std::string, double>& pi_by_stratum,
                                   Rng& rng) {
  const int n = static_cast<int>(strata.size());
  std::map<std::string, std::vector<int>> groups;  // lexicographic iteration
  for (int i = 0; i < n; ++i) groups[strata[i]].push_back(i);

  Assignment a;
  a.d.assign(n, 0);
  a.design.kind = DesignKind::StratifiedBlock;
  a.design.pi_by_stratum = pi_by_stratum;
  for (const auto& [label, idx] : groups) {
    auto it = pi_by_stratum.find(label);
    if (it == pi_by_stratum.end())
      throw MismatchError("assign_stratified_block: no assignment share for stratum '" +
                          label + "'");
    const int nx = static_cast<int>(idx.size());
    if (nx < 2)
      throw MismatchError("degenerate design: stratum '" + label +
                          "' has fewer than 2 units");
    const int n1 = floor_count(it->second, nx);
    if (n1 < 1 || n1 > nx - 1)
      throw MismatchError("degenerate design: stratum '" + label +
                          "' gets treated count " + std::to_string(n1) +
                          " out of " + std::to_string(nx));
    std::vector<int> pattern = complete_pattern(nx, n1, rng);
    for (int j = 0; j < nx; ++j) a.d[idx[j]] = pattern[j];
  }
  return a;
}

Eigen::VectorXd proximity_scores(const Eigen::MatrixXd& covariates) {
  const int n = static_cast<int>(covariates.rows());
  const int k = static_cast<int>(covariates.cols());
  if (k < 1) throw MismatchError("proximity_scores: need at least one covariate");
  if (k == 1) return covariates.col(0);
  // Score on the first principal direction of the covariates.
  Eigen::RowVectorXd mean = covariates.colwise().mean();
  Eigen::MatrixXd centered = covariates.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd direction = eig.eigenvectors().col(k - 1);  // largest eigenvalue
  // Eigenvector sign is arbitrary; pin it for reproducibility.
  int imax = 0;
  for (int j = 1; j < k; ++j)
    if (std::abs(direction[j]) > std::abs(direction[imax])) imax = j;
  if (direction[imax] < 0) direction = -direction;
  return centered * direction;
}

std::vector<std::pair<int, int>> match_pairs(const Eigen::MatrixXd& covariates) {
  const int n = static_cast<int>(covariates.rows());
  if (n % 2 != 0)
    throw MismatchError("match_pairs: need an even number of units");
  const Eigen::VectorXd score = proximity_scores(covariates);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return score[i] < score[j]; });

  std::vector<std::pair<int, int>> pairing;
  pairing.reserve(n / 2);
  for (int j = 0; j + 1 < n; j += 2) pairing.emplace_back(order[j], order[j + 1]);
  return pairing;
}

Assignment assign_matched_pairs(const std::vector<std::pair<int, int>>& pairing,
                                Rng& rng) {
  int n = 0;
  for (const auto& [first, second] : pairing) n = std::max({n, first + 1, second + 1});
  Assignment a;
  a.d.assign(n, 0);
  a.design.kind = DesignKind::MatchedPairs;
  a.pairing = pairing;
  std::vector<int> seen(n, 0);
  for (const auto& [first, second] : pairing) {
    if (first == second || seen[first] || seen[second])
      throw MismatchError("assign_matched_pairs: pairing is not a perfect matching");
    seen[first] = seen[second] = 1;
    const int coin = static_cast<int>(rng.below(2));
    a.d[first] = coin;
    a.d[second] = 1 - coin;
  }
  for (int flag : seen)
    if (!flag) throw MismatchError("assign_matched_pairs: pairing is not a perfect matching");
  return a;
}

Assignment assign_clusters(const ClusterSample& clusters, const DesignSpec& spec,
                           Rng& rng) {
  spec.check();
  const int g = clusters.size();
  Assignment a;
  if (spec.kind == DesignKind::ClusterComplete || spec.kind == DesignKind::Complete) {
    a = assign_complete(g, spec.pi, rng);
    a.design.kind = DesignKind::ClusterComplete;
    a.design.pi = spec.pi;
  } else if (spec.kind == DesignKind::ClusterStratifiedBlock ||
             spec.kind == DesignKind::StratifiedBlock) {
    if (!clusters.has_strata())
      throw MismatchError("assign_clusters: stratified design needs cluster strata");
    std::map<std::string, double> shares = spec.pi_by_stratum;
    for (const auto& label : clusters.strata)
      shares.emplace(label, spec.pi);
    a = assign_stratified_block(clusters.strata, shares, rng);
    a.design.kind = DesignKind::ClusterStratifiedBlock;
  } else {
    throw MismatchError("assign_clusters: unsupported design kind");
  }
  a.design.seed = spec.seed;
  return a;
}

std::map<std::string, int> imbalance(const std::vector<int>& d,
                                     const std::vector<std::string>& strata) {
  return imbalance(d, strata, {});
}

std::map<std::string, int> imbalance(const std::vector<int>& d,
                                     const std::vector<std::string>& strata,
                                     const std::vector<std::string>& labels) {
  if (d.size() != strata.size())
    throw MismatchError("imbalance: strata labels required for every unit");
  std::map<std::string, int> imb;
  for (const auto& label : labels) imb[label] = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    imb[strata[i]] += d[i] == 1 ? 1 : -1;
  return imb;
}

}  // namespace rct
