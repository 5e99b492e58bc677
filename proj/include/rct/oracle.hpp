#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rct/model.hpp"
#include "rct/rng.hpp"

namespace rct {

// ---------------------------------------------------------------------------
// Data-generating processes
// ---------------------------------------------------------------------------

struct Poly {
  std::vector<double> coefficients;  // c0 + c1*x + c2*x^2 + ...
  double operator()(double x) const;
};

// Scalar covariate with finite support. Conditional means and noise scales
// are given per support point, as are optional stratum labels (defaults: one
// stratum per support point).
struct DiscreteX {
  std::vector<double> values;
  std::vector<double> probs;
  std::vector<double> mean1, mean0, sd1, sd0;
  std::vector<std::string> strata;
};

// Scalar covariate, uniform on [lo, hi]; conditional means and noise scales
// are polynomials in x.
struct UniformX {
  double lo = 0.0, hi = 1.0;
  Poly mean1, mean0, sd1, sd0;
};

// Super-population law for individual-level experiments. Potential outcomes
// are m_d(X) plus independent normal noise with scale sd_d(X) per arm.
struct Dgp {
  std::variant<DiscreteX, UniformX> x;

  bool discrete() const { return std::holds_alternative<DiscreteX>(x); }
  const DiscreteX& as_discrete() const;

  double ate() const;
  // Var[Y(1) - Y(0)] under the law (arm noises independent).
  double treatment_effect_variance() const;
  std::string stratum_label(int support_index) const;

  struct Draw {
    double x;
    double y1, y0;
    std::string stratum;  // empty for continuous support
  };
  Draw draw(Rng& rng) const;
};

struct DrawnUnits {
  std::vector<double> y1, y0;
  Eigen::MatrixXd x;  // n-by-1
  std::vector<std::string> strata;  // empty for continuous support
};
DrawnUnits draw_units(const Dgp& dgp, int n, Rng& rng);
Sample observe(const DrawnUnits& units, const std::vector<int>& d);
PotentialPopulation to_population(const DrawnUnits& units);

// Cluster-level law: true size N_g from a finite law; the cluster-average
// potential outcome has mean mean_d(N_g) with iid member-level normal noise.
// `sampled` members are drawn per cluster (0 means the whole cluster).
struct ClusterDgp {
  std::vector<int> sizes;
  std::vector<double> probs;
  std::vector<double> mean1, mean0;  // aligned with sizes
  double sd1 = 1.0, sd0 = 1.0;
  int sampled = 0;

  int m_of(int size) const;
  double delta_eq() const;
  double delta_size() const;
  double theta() const;  // limit of the individual-row difference in means
  double v_eq(double pi) const;
  double v_size(double pi) const;
};

struct DrawnClusters {
  std::vector<int> n_true;
  std::vector<std::vector<double>> y1, y0;  // sampled members' potentials
};
DrawnClusters draw_clusters(const ClusterDgp& dgp, int count, Rng& rng);
ClusterSample observe(const DrawnClusters& clusters, const std::vector<int>& d);

// ---------------------------------------------------------------------------
// Closed-form asymptotic variances
// ---------------------------------------------------------------------------

struct TheoreticalVariances {
  double ate = 0.0;
  double v_cr = 0.0;    // complete randomization, difference in means
  double v_sbr = 0.0;   // stratified block randomization (the dgp's strata)
  double v_pool = 0.0;  // pooled linear adjustment
  double v_sat = 0.0;   // interacted linear adjustment
  double v_star = 0.0;  // efficient variance (conditioning on the full X)
  double v_eq = std::numeric_limits<double>::quiet_NaN();
  double v_size = std::numeric_limits<double>::quiet_NaN();
  // Components of the pooled-adjustment variance.
  double gamma = 0.0, gamma1 = 0.0, gamma0 = 0.0, sigma_x = 0.0;
  bool approximate = false;  // continuous support uses a 10^7-draw plug-in
};

// Exact for discrete support; plug-in (flagged approximate) for continuous.
TheoreticalVariances theoretical_variances(const Dgp& dgp, double pi);

// Cluster estimand variances appended to a TheoreticalVariances.
void add_cluster_variances(TheoreticalVariances& tv, const ClusterDgp& dgp, double pi);

// Asymptotic variance of the saturated estimator when shares vary by stratum.
double theoretical_sat_variance(const Dgp& dgp,
                                const std::map<std::string, double>& pi_by_stratum);

// ---------------------------------------------------------------------------
// Exhaustive enumeration
// ---------------------------------------------------------------------------

struct CompleteEnumeration {
  long long assignments = 0;
  double mean = 0.0;         // exact E[difference in means] over assignments
  double variance = 0.0;     // exact Var over assignments
  double closed_form = 0.0;  // S1^2/n1 + S0^2/n0 - SDelta^2/N
  double fp_ate = 0.0;
};

// Design-based enumeration with the population drawn as the sample (n = N).
// Refuses rather than samples once C(n, n1) exceeds 10^6.
CompleteEnumeration enumerate_complete(const PotentialPopulation& population, int n1);

struct StratifiedEnumeration {
  long long assignments = 0;
  // Randomness: assignments enumerated exactly; outcomes integrated in closed
  // form conditional on X via the dgp's conditional moments.
  double mean_dim = 0.0, var_dim = 0.0;
  double mean_sat = 0.0, var_sat = 0.0;  // stratified designs only
  double max_abs_bias_post = 0.0;
  double mean_bias_post_sq = 0.0;
  double mean_conditional_variance = 0.0;  // E over assignments of Var[dim|X,D]
  double design_independent_term = 0.0;    // (2/n^2) sum_i (s1_i^2 + s0_i^2)
  std::map<std::string, std::map<int, long long>> imbalance_counts;
};

// Enumerates assignments for a fixed covariate profile: complete
// randomization on the pooled units (design.kind == Complete) or stratified
// block randomization within strata. Per-unit conditional moments come from
// the generating law; outcome randomness is integrated out in closed form.
StratifiedEnumeration enumerate_stratified(const std::vector<std::string>& strata,
                                           const std::vector<double>& m1,
                                           const std::vector<double>& m0,
                                           const std::vector<double>& s1,
                                           const std::vector<double>& s0,
                                           const DesignSpec& design);

// ---------------------------------------------------------------------------
// Monte Carlo replication engine
// ---------------------------------------------------------------------------

struct McScenario {
  std::string name;
  std::variant<Dgp, ClusterDgp> dgp;
  DesignKind design = DesignKind::Complete;
  double pi = 0.5;
  std::map<std::string, double> pi_by_stratum;
  std::string estimator = "dim";
  std::string variance = "auto";
  std::string aipw_model = "linear";
  int n = 100;              // units, or clusters for cluster dgps
  int replications = 1000;  // R >= 100
  std::uint64_t seed = 0;
  double level = 0.95;
};

struct McReport {
  std::string name, design, estimator, variance;
  int n = 0, replications = 0;
  double target = 0.0;          // the estimand the estimator converges to
  double mean_estimate = 0.0;
  double bias = 0.0, mcse_bias = 0.0;
  double emp_variance = 0.0, mcse_emp_variance = 0.0;
  double mean_variance_estimate = 0.0;
  double coverage = 0.0, mcse_coverage = 0.0;
};

// Deterministic given the seed: replicate r uses the stream derive_seed(seed, r),
// so replications can run in any order (or concurrently) without changing
// the result.
McReport monte_carlo(const McScenario& scenario);

// ---------------------------------------------------------------------------
// Super- versus finite-population variance gap
// ---------------------------------------------------------------------------

struct GapReport {
  double lambda = 0.0;       // n / N
  double gap = 0.0;          // n*(plug-in super variance) - n*(exact fp variance)
  double gap_mcse = 0.0;
  double gap_law = 0.0;      // same with the law's variances in the first term
  double gap_law_mcse = 0.0;
  double reference = 0.0;    // lambda * Var[Y(1) - Y(0)] under the law
  int populations = 0;
};

// Draws `populations` finite populations of size N from the law, computes the
// exact finite-population variance of the difference in means for each, and
// reports the scaled super-minus-finite gap against its theoretical limit.
GapReport finite_pop_gap(const Dgp& dgp, int n, int n1, long N, int populations,
                         std::uint64_t seed);

}  // namespace rct
