#include "rct/variance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "rct/design.hpp"
#include "rct/errors.hpp"
#include "rct/rng.hpp"

namespace rct {

double sample_variance(const std::vector<double>& values) {
  const std::size_t count = values.size();
  if (count < 2) throw MismatchError("sample_variance: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= count;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / (count - 1);
}

namespace {

std::pair<std::vector<double>, std::vector<double>> split_arms(
    const std::vector<double>& y, const std::vector<int>& d) {
  std::vector<double> treated, control;
  for (std::size_t i = 0; i < y.size(); ++i)
    (d[i] == 1 ? treated : control).push_back(y[i]);
  return {std::move(treated), std::move(control)};
}

}  // namespace

double arm_robust_variance(const std::vector<double>& y, const std::vector<int>& d) {
  auto [treated, control] = split_arms(y, d);
  if (treated.size() < 2 || control.size() < 2)
    throw MismatchError("arm_robust_variance: each arm needs at least 2 units");
  return sample_variance(treated) / treated.size() +
         sample_variance(control) / control.size();
}

double arm_robust_variance(const Sample& sample) {
  return arm_robust_variance(sample.y, sample.d);
}

double finite_pop_bound(const Sample& sample, long population_size, bool improved) {
  if (population_size < sample.n())
    throw MismatchError("finite_pop_bound: population size N must be >= n");
  auto [treated, control] = split_arms(sample.y, sample.d);
  if (treated.size() < 2 || control.size() < 2)
    throw MismatchError("finite_pop_bound: each arm needs at least 2 units");
  const double v1 = sample_variance(treated);
  const double v0 = sample_variance(control);
  double bound = v1 / treated.size() + v0 / control.size();
  if (improved) {
    const double gap = std::sqrt(v1) - std::sqrt(v0);
    bound -= gap * gap / population_size;
  }
  return bound;
}

namespace {

struct StratumCell {
  std::vector<double> y1, y0;
};

std::map<std::string, StratumCell> split_strata(const Sample& sample) {
  if (!sample.has_strata())
    throw MismatchError("stratified variance estimator: sample has no stratum labels");
  std::map<std::string, StratumCell> cells;
  for (int i = 0; i < sample.n(); ++i) {
    auto& cell = cells[sample.strata[i]];
    (sample.d[i] == 1 ? cell.y1 : cell.y0).push_back(sample.y[i]);
  }
  return cells;
}

double stratified_variance(const Sample& sample,
                           const std::map<std::string, double>& pi_by_stratum,
                           bool with_between_term) {
  const auto cells = split_strata(sample);
  const double n = sample.n();

  double sat = 0.0;
  for (const auto& [label, cell] : cells) {
    if (cell.y1.size() < 2 || cell.y0.size() < 2)
      throw MismatchError("stratified variance estimator: stratum '" + label +
                          "' has an arm with fewer than 2 units");
    const double nx = cell.y1.size() + cell.y0.size();
    const double mean1 = std::accumulate(cell.y1.begin(), cell.y1.end(), 0.0) / cell.y1.size();
    const double mean0 = std::accumulate(cell.y0.begin(), cell.y0.end(), 0.0) / cell.y0.size();
    sat += nx / n * (mean1 - mean0);
  }

  double total = 0.0;
  for (const auto& [label, cell] : cells) {
    auto it = pi_by_stratum.find(label);
    if (it == pi_by_stratum.end())
      throw MismatchError("stratified variance estimator: no assignment share for stratum '" +
                          label + "'");
    const double share = it->second;
    if (!(share > 0.0 && share < 1.0))
      throw MismatchError("stratified variance estimator: share for stratum '" + label +
                          "' must lie strictly in (0,1)");
    const double nx = cell.y1.size() + cell.y0.size();
    const double weight = nx / n;
    total += weight * (sample_variance(cell.y1) / share +
                       sample_variance(cell.y0) / (1.0 - share));
    if (with_between_term) {
      const double mean1 = std::accumulate(cell.y1.begin(), cell.y1.end(), 0.0) / cell.y1.size();
      const double mean0 = std::accumulate(cell.y0.begin(), cell.y0.end(), 0.0) / cell.y0.size();
      const double gap = (mean1 - mean0) - sat;
      total += weight * gap * gap;
    }
  }
  return total / n;
}

}  // namespace

double sbr_variance(const Sample& sample,
                    const std::map<std::string, double>& pi_by_stratum) {
  return stratified_variance(sample, pi_by_stratum, true);
}

double design_based_strat_variance(const Sample& sample,
                                   const std::map<std::string, double>& pi_by_stratum) {
  return stratified_variance(sample, pi_by_stratum, false);
}

namespace {

struct PairView {
  int id;
  int first, second;  // unit indices
};

std::vector<PairView> collect_pairs(const Sample& sample) {
  if (!sample.has_pairs())
    throw MismatchError("matched_pairs_variance: sample has no pair ids");
  std::map<int, std::vector<int>> members;
  for (int i = 0; i < sample.n(); ++i) members[sample.pair_ids[i]].push_back(i);
  std::vector<PairView> pairs;
  pairs.reserve(members.size());
  for (const auto& [id, idx] : members) {
    if (idx.size() != 2)
      throw DataError("matched_pairs_variance: pair " + std::to_string(id) +
                      " does not have exactly 2 units");
    if (sample.d[idx[0]] + sample.d[idx[1]] != 1)
      throw DataError("matched_pairs_variance: pair " + std::to_string(id) +
                      " lacks exactly one treated unit");
    pairs.push_back({id, idx[0], idx[1]});
  }
  return pairs;
}

}  // namespace

std::vector<int> pair_proximity_order(const Sample& sample) {
  auto pairs = collect_pairs(sample);
  std::vector<double> score(pairs.size());
  if (sample.k() >= 1) {
    const Eigen::VectorXd unit_scores = proximity_scores(sample.x);
    for (std::size_t j = 0; j < pairs.size(); ++j)
      score[j] = 0.5 * (unit_scores[pairs[j].first] + unit_scores[pairs[j].second]);
  } else {
    // No covariates to order by: trust the pair ids, which the assignment
    // tooling emits in proximity order.
    for (std::size_t j = 0; j < pairs.size(); ++j) score[j] = pairs[j].id;
  }
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return pairs[a].id < pairs[b].id;
  });
  std::vector<int> ids;
  ids.reserve(pairs.size());
  for (std::size_t j : order) ids.push_back(pairs[j].id);
  return ids;
}

double matched_pairs_variance(const Sample& sample) {
  return matched_pairs_variance(sample, pair_proximity_order(sample));
}

double matched_pairs_variance(const Sample& sample, const std::vector<int>& pair_order) {
  const auto pairs = collect_pairs(sample);
  const std::size_t num_pairs = pairs.size();
  if (num_pairs < 4) throw MismatchError("matched_pairs_variance: too few pairs");
  if (pair_order.size() != num_pairs)
    throw MismatchError("matched_pairs_variance: pair order must list every pair id once");

  std::map<int, double> pair_sum;
  for (const auto& pair : pairs)
    pair_sum[pair.id] = sample.y[pair.first] + sample.y[pair.second];

  auto [treated, control] = split_arms(sample.y, sample.d);
  const double v1 = sample_variance(treated);
  const double v0 = sample_variance(control);

  const double n = sample.n();
  double m_hat = 0.0;
  for (double value : sample.y) m_hat += value;
  m_hat *= 2.0 / n;

  // Products of pair sums across adjacent pairs of pairs; an odd leftover
  // pair enters the arm variances but not lambda.
  const std::size_t num_products = num_pairs / 2;
  double lambda = 0.0;
  for (std::size_t j = 0; j < num_products; ++j) {
    auto a = pair_sum.find(pair_order[2 * j]);
    auto b = pair_sum.find(pair_order[2 * j + 1]);
    if (a == pair_sum.end() || b == pair_sum.end())
      throw MismatchError("matched_pairs_variance: pair order names an unknown pair id");
    lambda += a->second * b->second;
  }
  lambda /= num_products;

  const double correction = std::max(0.0, lambda - m_hat * m_hat);
  return std::max(0.0, (2.0 * v1 + 2.0 * v0 - correction) / n);
}

double cluster_eq_variance(const ClusterSample& clusters) {
  std::vector<double> ybars(clusters.size());
  for (int g = 0; g < clusters.size(); ++g) ybars[g] = clusters.ybar(g);
  return arm_robust_variance(ybars, clusters.d);
}

double cluster_size_variance(const ClusterSample& clusters, std::optional<double> pi) {
  const int g_total = clusters.size();
  double nbar = 0.0;
  for (int g = 0; g < g_total; ++g) nbar += clusters.n_true[g];
  nbar /= g_total;

  double num[2] = {0.0, 0.0}, den[2] = {0.0, 0.0};
  for (int g = 0; g < g_total; ++g) {
    num[clusters.d[g]] += clusters.ybar(g) * clusters.n_true[g];
    den[clusters.d[g]] += clusters.n_true[g];
  }
  if (den[0] <= 0.0 || den[1] <= 0.0)
    throw MismatchError("cluster_size_variance: empty arm at cluster level");
  const double arm_mean[2] = {num[0] / den[0], num[1] / den[1]};

  std::vector<double> yhat(g_total);
  for (int g = 0; g < g_total; ++g)
    yhat[g] = clusters.n_true[g] / nbar * (clusters.ybar(g) - arm_mean[clusters.d[g]]);

  double variance = arm_robust_variance(yhat, clusters.d);

  if (clusters.has_strata()) {
    const double share =
        pi.value_or(static_cast<double>(clusters.treated_count()) / g_total);
    if (!(share > 0.0 && share < 1.0))
      throw MismatchError("cluster_size_variance: share must lie strictly in (0,1)");
    struct Cell {
      double sum1 = 0, sum0 = 0;
      int g1 = 0, g0 = 0;
    };
    std::map<std::string, Cell> cells;
    for (int g = 0; g < g_total; ++g) {
      auto& cell = cells[clusters.strata[g]];
      if (clusters.d[g] == 1) {
        cell.sum1 += yhat[g];
        ++cell.g1;
      } else {
        cell.sum0 += yhat[g];
        ++cell.g0;
      }
    }
    // Between-stratum correction in the stratified template, with the
    // rescaled outcomes in place of the raw ones.
    double hbar = 0.0;
    for (const auto& [label, cell] : cells) {
      if (cell.g1 < 1 || cell.g0 < 1)
        throw MismatchError("cluster_size_variance: stratum '" + label +
                            "' has an empty cluster arm");
      const double h = cell.sum1 / cell.g1 / share + cell.sum0 / cell.g0 / (1.0 - share);
      hbar += (cell.g1 + cell.g0) / static_cast<double>(g_total) * h;
    }
    double between = 0.0;
    for (const auto& [label, cell] : cells) {
      const double h = cell.sum1 / cell.g1 / share + cell.sum0 / cell.g0 / (1.0 - share);
      between += (cell.g1 + cell.g0) / static_cast<double>(g_total) * (h - hbar) * (h - hbar);
    }
    variance -= share * (1.0 - share) * between / g_total;
  }
  return std::max(0.0, variance);
}

std::pair<double, double> confidence_interval(double point, double variance,
                                              double level) {
  if (variance < 0.0)
    throw MismatchError("confidence_interval: variance must be nonnegative");
  if (!(level > 0.0 && level < 1.0))
    throw MismatchError("confidence_interval: level must lie strictly in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double half_width = z * std::sqrt(variance);
  return {point - half_width, point + half_width};
}

double pooled_robust_variance(const Sample& sample) {
  if (sample.k() < 1)
    throw MismatchError("pooled_robust_variance: sample has no covariates");
  const int n = sample.n();
  const int p = 2 + sample.k();
  Eigen::MatrixXd a(n, p);
  std::vector<std::string> labels = {"const", "d"};
  for (int j = 0; j < sample.k(); ++j) labels.push_back("x" + std::to_string(j + 1));
  for (int i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = sample.d[i];
    a.row(i).tail(sample.k()) = sample.x.row(i);
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(sample.y.data(), n);
  const LeastSquaresFit fit = least_squares(y, a, labels);

  // HC2 sandwich: bread (A'A)^{-1}, meat scaled by 1/(1 - h_i).
  const Eigen::MatrixXd gram_inverse =
      (a.transpose() * a).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < n; ++i) {
    const double leverage = a.row(i) * gram_inverse * a.row(i).transpose();
    if (leverage > 1.0 - 1e-10)
      throw MismatchError("pooled_robust_variance: a row has leverage 1");
    const double r = fit.residuals[i];
    meat.noalias() += a.row(i).transpose() * a.row(i) * (r * r / (1.0 - leverage));
  }
  const Eigen::MatrixXd cov = gram_inverse * meat * gram_inverse;
  return cov(1, 1);
}

double adjusted_influence_variance(const Sample& sample, double pi,
                                   const FittedWorkingModel& fitted) {
  if (!(pi > 0.0 && pi < 1.0))
    throw MismatchError("adjusted_influence_variance: pi must lie strictly in (0,1)");
  std::vector<double> residuals1, residuals0, fitted_effect;
  Eigen::VectorXd xi(sample.k());
  for (int i = 0; i < sample.n(); ++i) {
    if (sample.k() > 0) xi = sample.x.row(i).transpose();
    const double mu1 = fitted.mu(1, xi);
    const double mu0 = fitted.mu(0, xi);
    fitted_effect.push_back(mu1 - mu0);
    if (sample.d[i] == 1)
      residuals1.push_back(sample.y[i] - mu1);
    else
      residuals0.push_back(sample.y[i] - mu0);
  }
  if (residuals1.size() < 2 || residuals0.size() < 2)
    throw MismatchError("adjusted_influence_variance: each arm needs at least 2 units");
  double effect_spread = 0.0;
  bool constant_effect = std::adjacent_find(fitted_effect.begin(), fitted_effect.end(),
                                            std::not_equal_to<>()) == fitted_effect.end();
  if (!constant_effect) effect_spread = sample_variance(fitted_effect);
  return (sample_variance(residuals1) / pi + sample_variance(residuals0) / (1.0 - pi) +
          effect_spread) /
         sample.n();
}

std::string auto_variance_method(const std::string& estimator, bool has_strata,
                                 bool has_pairs, bool is_cluster) {
  if (estimator == "cluster-eq") return "cluster-eq";
  if (estimator == "cluster-size") return "cluster-size";
  if (estimator == "pooled") return "pooled-robust";
  if (estimator == "lin" || estimator == "aipw") return "influence";
  if (is_cluster) return "robust";  // individual-row estimator on clustered rows
  if (has_pairs) return "pairs";
  if (has_strata) return "sbr";
  return "robust";
}

}  // namespace rct
