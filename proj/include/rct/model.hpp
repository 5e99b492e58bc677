#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rct {

// Observed experimental data. Optional per-unit fields (strata, pair ids)
// are either empty or have one entry per unit. All types in this header are
// treated as immutable after construction and are safe to share across
// threads.
struct Sample {
  std::vector<double> y;
  std::vector<int> d;                // 0/1
  Eigen::MatrixXd x;                 // n rows, k columns; k == 0 is allowed
  std::vector<std::string> strata;   // empty, or one label per unit
  std::vector<int> pair_ids;         // empty, or one id per unit

  int n() const { return static_cast<int>(y.size()); }
  int k() const { return x.size() == 0 ? 0 : static_cast<int>(x.cols()); }
  bool has_strata() const { return !strata.empty(); }
  bool has_pairs() const { return !pair_ids.empty(); }
  int n_treated() const;
  int n_control() const;
};

struct Violation {
  int unit;          // index of the offending unit, -1 for sample-level rules
  std::string rule;
};

// Pure reporting operation: empty iff all Sample invariants hold.
std::vector<Violation> validate(const Sample& sample);

// Throws DataError listing all violations.
void ensure_valid(const Sample& sample);

// Complete data for simulation and enumeration: both potential outcomes are
// known for every unit.
struct PotentialPopulation {
  std::vector<double> y1;
  std::vector<double> y0;
  Eigen::MatrixXd x;                 // optional covariates (may be 0-by-0)
  std::vector<std::string> strata;   // empty, or one label per unit

  int size() const { return static_cast<int>(y1.size()); }
  double fp_ate() const;             // mean(y1) - mean(y0)
};

enum class DesignKind {
  Complete,
  StratifiedBlock,
  MatchedPairs,
  ClusterComplete,
  ClusterStratifiedBlock,
};

std::string design_kind_name(DesignKind kind);

struct DesignSpec {
  DesignKind kind = DesignKind::Complete;
  double pi = 0.5;
  std::map<std::string, double> pi_by_stratum;  // stratified kinds only
  std::uint64_t seed = 0;

  // Assignment share for a stratum: explicit map entry if present, else pi.
  double pi_for(const std::string& stratum) const;

  // Throws MismatchError if a share lies outside (0,1).
  void check() const;
};

struct Assignment {
  std::vector<int> d;
  DesignSpec design;
  std::vector<std::pair<int, int>> pairing;  // matched-pairs designs only
};

// Cluster-level data: true size N_g, the sampled members' outcomes, and the
// cluster-level treatment.
struct ClusterSample {
  std::vector<long long> ids;
  std::vector<int> n_true;                   // N_g
  std::vector<std::vector<double>> members;  // outcomes of sampled members
  std::vector<int> d;                        // D_g
  std::vector<std::string> strata;           // empty, or one label per cluster

  int size() const { return static_cast<int>(ids.size()); }
  bool has_strata() const { return !strata.empty(); }
  int m(int g) const { return static_cast<int>(members[g].size()); }
  double ybar(int g) const;
  int treated_count() const;
};

void ensure_valid(const ClusterSample& clusters);

struct EstimateReport {
  std::string estimand;  // "ATE", "Delta_eq", or "Delta_size"
  double point = 0.0;
  std::map<std::string, double> variance_estimates;
  double se = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
  double level = 0.95;
  long n = 0;  // units, or clusters for cluster estimands
  std::string method;
  std::string variance_method;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
};

// Fills se and ci from the selected variance estimate; enforces that every
// recorded variance is nonnegative.
EstimateReport make_report(std::string estimand, double point,
                           std::map<std::string, double> variance_estimates,
                           const std::string& selected, double level, long n,
                           std::string method);

}  // namespace rct
