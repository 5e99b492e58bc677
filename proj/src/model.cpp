#include "rct/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "rct/errors.hpp"
#include "rct/rng.hpp"
#include "rct/variance.hpp"

namespace rct {

int Sample::n_treated() const {
  return static_cast<int>(std::count(d.begin(), d.end(), 1));
}

int Sample::n_control() const {
  return static_cast<int>(std::count(d.begin(), d.end(), 0));
}

double PotentialPopulation::fp_ate() const {
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += y1[i] - y0[i];
  return s / size();
}

std::string design_kind_name(DesignKind kind) {
  switch (kind) {
    case DesignKind::Complete: return "complete";
    case DesignKind::StratifiedBlock: return "sbr";
    case DesignKind::MatchedPairs: return "pairs";
    case DesignKind::ClusterComplete: return "cluster-complete";
    case DesignKind::ClusterStratifiedBlock: return "cluster-sbr";
  }
  return "?";
}

double DesignSpec::pi_for(const std::string& stratum) const {
  auto it = pi_by_stratum.find(stratum);
  return it == pi_by_stratum.end() ? pi : it->second;
}

void DesignSpec::check() const {
  auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_open_unit(pi))
    throw MismatchError("design: assignment share pi must lie strictly in (0,1)");
  for (const auto& [label, share] : pi_by_stratum)
    if (!in_open_unit(share))
      throw MismatchError("design: assignment share for stratum '" + label +
                          "' must lie strictly in (0,1)");
}

std::vector<Violation> validate(const Sample& sample) {
  std::vector<Violation> v;
  const int n = sample.n();

  auto sample_level = [&](const std::string& rule) { v.push_back({-1, rule}); };

  if (static_cast<int>(sample.d.size()) != n)
    sample_level("treatment vector length differs from outcome vector length");
  if (sample.x.size() != 0 && static_cast<int>(sample.x.rows()) != n)
    sample_level("covariate matrix row count differs from outcome vector length");
  if (!sample.strata.empty() && static_cast<int>(sample.strata.size()) != n)
    sample_level("stratum labels must cover every unit when present");
  if (!sample.pair_ids.empty() && static_cast<int>(sample.pair_ids.size()) != n)
    sample_level("pair ids must cover every unit when present");
  if (!v.empty()) return v;  // structural problems make per-unit checks moot

  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(sample.y[i])) v.push_back({i, "missing outcome"});
    if (sample.d[i] != 0 && sample.d[i] != 1)
      v.push_back({i, "treatment not binary"});
  }
  if (sample.has_strata()) {
    for (int i = 0; i < n; ++i)
      if (sample.strata[i].empty()) v.push_back({i, "missing stratum label"});
  }
  if (sample.has_pairs()) {
    std::map<int, std::vector<int>> members;
    for (int i = 0; i < n; ++i) members[sample.pair_ids[i]].push_back(i);
    for (const auto& [id, idx] : members) {
      if (idx.size() != 2) {
        v.push_back({idx.front(), "incomplete pair"});
        continue;
      }
      if (sample.d[idx[0]] + sample.d[idx[1]] != 1)
        v.push_back({idx[0], "pair lacks exactly one treated unit"});
    }
  }
  return v;
}

void ensure_valid(const Sample& sample) {
  const auto violations = validate(sample);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid sample:";
  for (const auto& violation : violations) {
    msg << " [";
    if (violation.unit >= 0) msg << "unit " << violation.unit << ": ";
    msg << violation.rule << "]";
  }
  throw DataError(msg.str());
}

double ClusterSample::ybar(int g) const {
  const auto& ys = members[g];
  double s = 0.0;
  for (double value : ys) s += value;
  return s / ys.size();
}

int ClusterSample::treated_count() const {
  return static_cast<int>(std::count(d.begin(), d.end(), 1));
}

void ensure_valid(const ClusterSample& clusters) {
  const int g = clusters.size();
  if (static_cast<int>(clusters.n_true.size()) != g ||
      static_cast<int>(clusters.members.size()) != g ||
      static_cast<int>(clusters.d.size()) != g)
    throw DataError("invalid cluster sample: field lengths differ");
  if (!clusters.strata.empty() && static_cast<int>(clusters.strata.size()) != g)
    throw DataError("invalid cluster sample: stratum labels must cover every cluster");
  for (int i = 0; i < g; ++i) {
    if (clusters.members[i].empty())
      throw DataError("invalid cluster sample: cluster " +
                      std::to_string(clusters.ids[i]) + " has no sampled members");
    if (clusters.m(i) > clusters.n_true[i])
      throw DataError("invalid cluster sample: cluster " +
                      std::to_string(clusters.ids[i]) +
                      " has more sampled members than its true size");
    if (clusters.d[i] != 0 && clusters.d[i] != 1)
      throw DataError("invalid cluster sample: cluster " +
                      std::to_string(clusters.ids[i]) + " treatment not binary");
    for (double value : clusters.members[i])
      if (!std::isfinite(value))
        throw DataError("invalid cluster sample: cluster " +
                        std::to_string(clusters.ids[i]) + " has a missing outcome");
  }
}

EstimateReport make_report(std::string estimand, double point,
                           std::map<std::string, double> variance_estimates,
                           const std::string& selected, double level, long n,
                           std::string method) {
  for (const auto& [name, value] : variance_estimates)
    if (!(value >= 0.0))
      throw MismatchError("variance estimate '" + name + "' is negative");
  auto it = variance_estimates.find(selected);
  if (it == variance_estimates.end())
    throw MismatchError("selected variance method '" + selected +
                        "' was not computed");
  EstimateReport report;
  report.estimand = std::move(estimand);
  report.point = point;
  report.variance_estimates = std::move(variance_estimates);
  report.se = std::sqrt(it->second);
  report.ci = confidence_interval(point, it->second, level);
  report.level = level;
  report.n = n;
  report.method = std::move(method);
  report.variance_method = selected;
  return report;
}

}  // namespace rct
