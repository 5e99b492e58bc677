#include "rct/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rct/design.hpp"
#include "rct/enumerate.hpp"
#include "rct/errors.hpp"
#include "rct/estimate.hpp"
#include "rct/variance.hpp"

namespace rct {

namespace {

// Neumaier-compensated accumulator: reductions stay deterministic to ~1e-16
// regardless of magnitude ordering.
struct KahanSum {
  double sum = 0.0, compensation = 0.0;
  void add(double value) {
    const double t = sum + value;
    if (std::fabs(sum) >= std::fabs(value))
      compensation += (sum - t) + value;
    else
      compensation += (value - t) + sum;
    sum = t;
  }
  double value() const { return sum + compensation; }
};

double kahan_mean(const std::vector<double>& values) {
  KahanSum acc;
  for (double v : values) acc.add(v);
  return acc.value() / values.size();
}

// Population variance (divide by count): used when `values` is the full
// distribution, e.g. over all enumerated assignments.
double kahan_population_variance(const std::vector<double>& values, double mean) {
  KahanSum acc;
  for (double v : values) acc.add((v - mean) * (v - mean));
  return acc.value() / values.size();
}

}  // namespace

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

double Poly::operator()(double x) const {
  double value = 0.0;
  for (std::size_t j = coefficients.size(); j-- > 0;) value = value * x + coefficients[j];
  return value;
}

namespace {

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.coefficients.empty() || b.coefficients.empty()) return {};
  Poly out;
  out.coefficients.assign(a.coefficients.size() + b.coefficients.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.coefficients.size(); ++i)
    for (std::size_t j = 0; j < b.coefficients.size(); ++j)
      out.coefficients[i + j] += a.coefficients[i] * b.coefficients[j];
  return out;
}

Poly poly_times_x(const Poly& a) {
  Poly out;
  out.coefficients.assign(a.coefficients.size() + 1, 0.0);
  for (std::size_t i = 0; i < a.coefficients.size(); ++i)
    out.coefficients[i + 1] = a.coefficients[i];
  return out;
}

// Mean of a polynomial under Uniform(lo, hi): exact antiderivative.
double uniform_mean(const Poly& a, double lo, double hi) {
  double total = 0.0;
  for (std::size_t j = 0; j < a.coefficients.size(); ++j) {
    const double num = std::pow(hi, static_cast<double>(j + 1)) -
                       std::pow(lo, static_cast<double>(j + 1));
    total += a.coefficients[j] * num / ((j + 1) * (hi - lo));
  }
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dgp
// ---------------------------------------------------------------------------

const DiscreteX& Dgp::as_discrete() const {
  if (!discrete()) throw MismatchError("dgp: discrete covariate support required");
  return std::get<DiscreteX>(x);
}

namespace {

void check_discrete(const DiscreteX& dx) {
  const std::size_t m = dx.values.size();
  if (m == 0 || dx.probs.size() != m || dx.mean1.size() != m || dx.mean0.size() != m ||
      dx.sd1.size() != m || dx.sd0.size() != m)
    throw MismatchError("dgp: discrete support fields must have equal lengths");
  if (!dx.strata.empty() && dx.strata.size() != m)
    throw MismatchError("dgp: stratum labels must cover every support point");
  double total = 0.0;
  for (double p : dx.probs) {
    if (p <= 0.0) throw MismatchError("dgp: support probabilities must be positive");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw MismatchError("dgp: support probabilities must sum to 1");
  for (std::size_t j = 0; j < m; ++j)
    if (dx.sd1[j] < 0.0 || dx.sd0[j] < 0.0)
      throw MismatchError("dgp: noise scales must be nonnegative");
}

// The moments every closed form below is assembled from. Exact for both
// support types (polynomial means integrate in closed form under a uniform
// law).
struct BasicMoments {
  double ex = 0, exx = 0;
  double em1 = 0, em0 = 0, em1sq = 0, em0sq = 0, em1m0 = 0;
  double em1x = 0, em0x = 0;
  double es1sq = 0, es0sq = 0;
};

BasicMoments basic_moments(const Dgp& dgp) {
  BasicMoments mo;
  if (dgp.discrete()) {
    const auto& dx = dgp.as_discrete();
    check_discrete(dx);
    for (std::size_t j = 0; j < dx.values.size(); ++j) {
      const double p = dx.probs[j], v = dx.values[j];
      mo.ex += p * v;
      mo.exx += p * v * v;
      mo.em1 += p * dx.mean1[j];
      mo.em0 += p * dx.mean0[j];
      mo.em1sq += p * dx.mean1[j] * dx.mean1[j];
      mo.em0sq += p * dx.mean0[j] * dx.mean0[j];
      mo.em1m0 += p * dx.mean1[j] * dx.mean0[j];
      mo.em1x += p * dx.mean1[j] * v;
      mo.em0x += p * dx.mean0[j] * v;
      mo.es1sq += p * dx.sd1[j] * dx.sd1[j];
      mo.es0sq += p * dx.sd0[j] * dx.sd0[j];
    }
    return mo;
  }
  const auto& ux = std::get<UniformX>(dgp.x);
  if (!(ux.hi > ux.lo)) throw MismatchError("dgp: uniform support needs hi > lo");
  const Poly identity{{0.0, 1.0}};
  auto mean_of = [&](const Poly& p) { return uniform_mean(p, ux.lo, ux.hi); };
  mo.ex = mean_of(identity);
  mo.exx = mean_of(poly_mul(identity, identity));
  mo.em1 = mean_of(ux.mean1);
  mo.em0 = mean_of(ux.mean0);
  mo.em1sq = mean_of(poly_mul(ux.mean1, ux.mean1));
  mo.em0sq = mean_of(poly_mul(ux.mean0, ux.mean0));
  mo.em1m0 = mean_of(poly_mul(ux.mean1, ux.mean0));
  mo.em1x = mean_of(poly_times_x(ux.mean1));
  mo.em0x = mean_of(poly_times_x(ux.mean0));
  mo.es1sq = mean_of(poly_mul(ux.sd1, ux.sd1));
  mo.es0sq = mean_of(poly_mul(ux.sd0, ux.sd0));
  return mo;
}

}  // namespace

double Dgp::ate() const {
  const BasicMoments mo = basic_moments(*this);
  return mo.em1 - mo.em0;
}

double Dgp::treatment_effect_variance() const {
  const BasicMoments mo = basic_moments(*this);
  const double delta = mo.em1 - mo.em0;
  const double var_cate = mo.em1sq - 2 * mo.em1m0 + mo.em0sq - delta * delta;
  return var_cate + mo.es1sq + mo.es0sq;
}

std::string Dgp::stratum_label(int support_index) const {
  const auto& dx = as_discrete();
  if (!dx.strata.empty()) return dx.strata[support_index];
  return "x" + std::to_string(support_index);
}

Dgp::Draw Dgp::draw(Rng& rng) const {
  Draw out;
  if (discrete()) {
    const auto& dx = std::get<DiscreteX>(x);
    const double u = rng.uniform01();
    double cumulative = 0.0;
    std::size_t j = 0;
    for (; j < dx.values.size(); ++j) {
      cumulative += dx.probs[j];
      if (u <= cumulative) break;
    }
    if (j == dx.values.size()) j = dx.values.size() - 1;
    out.x = dx.values[j];
    out.y1 = dx.mean1[j] + dx.sd1[j] * rng.normal();
    out.y0 = dx.mean0[j] + dx.sd0[j] * rng.normal();
    out.stratum = stratum_label(static_cast<int>(j));
    return out;
  }
  const auto& ux = std::get<UniformX>(x);
  out.x = ux.lo + rng.uniform01() * (ux.hi - ux.lo);
  out.y1 = ux.mean1(out.x) + ux.sd1(out.x) * rng.normal();
  out.y0 = ux.mean0(out.x) + ux.sd0(out.x) * rng.normal();
  return out;
}

DrawnUnits draw_units(const Dgp& dgp, int n, Rng& rng) {
  DrawnUnits units;
  units.y1.resize(n);
  units.y0.resize(n);
  units.x.resize(n, 1);
  if (dgp.discrete()) units.strata.resize(n);
  for (int i = 0; i < n; ++i) {
    const Dgp::Draw draw = dgp.draw(rng);
    units.y1[i] = draw.y1;
    units.y0[i] = draw.y0;
    units.x(i, 0) = draw.x;
    if (dgp.discrete()) units.strata[i] = draw.stratum;
  }
  return units;
}

Sample observe(const DrawnUnits& units, const std::vector<int>& d) {
  Sample sample;
  const int n = static_cast<int>(units.y1.size());
  sample.y.resize(n);
  for (int i = 0; i < n; ++i)
    sample.y[i] = d[i] == 1 ? units.y1[i] : units.y0[i];
  sample.d = d;
  sample.x = units.x;
  sample.strata = units.strata;
  return sample;
}

PotentialPopulation to_population(const DrawnUnits& units) {
  PotentialPopulation population;
  population.y1 = units.y1;
  population.y0 = units.y0;
  population.x = units.x;
  population.strata = units.strata;
  return population;
}

// ---------------------------------------------------------------------------
// ClusterDgp
// ---------------------------------------------------------------------------

int ClusterDgp::m_of(int size) const {
  return sampled == 0 ? size : std::min(sampled, size);
}

namespace {

void check_cluster(const ClusterDgp& dgp) {
  const std::size_t m = dgp.sizes.size();
  if (m == 0 || dgp.probs.size() != m || dgp.mean1.size() != m || dgp.mean0.size() != m)
    throw MismatchError("cluster dgp: size-law fields must have equal lengths");
  double total = 0.0;
  for (double p : dgp.probs) total += p;
  if (std::fabs(total - 1.0) > 1e-9)
    throw MismatchError("cluster dgp: size probabilities must sum to 1");
}

}  // namespace

double ClusterDgp::delta_eq() const {
  check_cluster(*this);
  double out = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) out += probs[j] * (mean1[j] - mean0[j]);
  return out;
}

double ClusterDgp::delta_size() const {
  check_cluster(*this);
  double numerator = 0.0, kappa = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    numerator += probs[j] * sizes[j] * (mean1[j] - mean0[j]);
    kappa += probs[j] * sizes[j];
  }
  return numerator / kappa;
}

double ClusterDgp::theta() const {
  check_cluster(*this);
  double numerator = 0.0, denominator = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    numerator += probs[j] * m_of(sizes[j]) * (mean1[j] - mean0[j]);
    denominator += probs[j] * m_of(sizes[j]);
  }
  return numerator / denominator;
}

double ClusterDgp::v_eq(double pi) const {
  check_cluster(*this);
  double e1 = 0, e0 = 0, e1sq = 0, e0sq = 0, noise1 = 0, noise0 = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    e1 += probs[j] * mean1[j];
    e0 += probs[j] * mean0[j];
    e1sq += probs[j] * mean1[j] * mean1[j];
    e0sq += probs[j] * mean0[j] * mean0[j];
    noise1 += probs[j] * sd1 * sd1 / m_of(sizes[j]);
    noise0 += probs[j] * sd0 * sd0 / m_of(sizes[j]);
  }
  const double var1 = e1sq - e1 * e1 + noise1;
  const double var0 = e0sq - e0 * e0 + noise0;
  return var1 / pi + var0 / (1.0 - pi);
}

double ClusterDgp::v_size(double pi) const {
  check_cluster(*this);
  double kappa = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) kappa += probs[j] * sizes[j];
  double c1 = 0, c0 = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    c1 += probs[j] * mean1[j] * sizes[j] / kappa;
    c0 += probs[j] * mean0[j] * sizes[j] / kappa;
  }
  double e1sq = 0, e0sq = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    const double ng = sizes[j];
    e1sq += probs[j] * ng * ng *
            ((mean1[j] - c1) * (mean1[j] - c1) + sd1 * sd1 / m_of(sizes[j]));
    e0sq += probs[j] * ng * ng *
            ((mean0[j] - c0) * (mean0[j] - c0) + sd0 * sd0 / m_of(sizes[j]));
  }
  e1sq /= kappa * kappa;
  e0sq /= kappa * kappa;
  return e1sq / pi + e0sq / (1.0 - pi);
}

DrawnClusters draw_clusters(const ClusterDgp& dgp, int count, Rng& rng) {
  check_cluster(dgp);
  DrawnClusters out;
  out.n_true.resize(count);
  out.y1.resize(count);
  out.y0.resize(count);
  for (int g = 0; g < count; ++g) {
    const double u = rng.uniform01();
    double cumulative = 0.0;
    std::size_t j = 0;
    for (; j < dgp.sizes.size(); ++j) {
      cumulative += dgp.probs[j];
      if (u <= cumulative) break;
    }
    if (j == dgp.sizes.size()) j = dgp.sizes.size() - 1;
    out.n_true[g] = dgp.sizes[j];
    const int members = dgp.m_of(dgp.sizes[j]);
    out.y1[g].resize(members);
    out.y0[g].resize(members);
    for (int i = 0; i < members; ++i) {
      out.y1[g][i] = dgp.mean1[j] + dgp.sd1 * rng.normal();
      out.y0[g][i] = dgp.mean0[j] + dgp.sd0 * rng.normal();
    }
  }
  return out;
}

ClusterSample observe(const DrawnClusters& clusters, const std::vector<int>& d) {
  ClusterSample out;
  const int count = static_cast<int>(clusters.n_true.size());
  out.ids.resize(count);
  out.n_true = clusters.n_true;
  out.members.resize(count);
  out.d = d;
  for (int g = 0; g < count; ++g) {
    out.ids[g] = g;
    out.members[g] = d[g] == 1 ? clusters.y1[g] : clusters.y0[g];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theoretical variances
// ---------------------------------------------------------------------------

TheoreticalVariances theoretical_variances(const Dgp& dgp, double pi) {
  if (!(pi > 0.0 && pi < 1.0))
    throw MismatchError("theoretical_variances: pi must lie strictly in (0,1)");
  const BasicMoments mo = basic_moments(dgp);

  TheoreticalVariances tv;
  tv.ate = mo.em1 - mo.em0;
  tv.sigma_x = mo.exx - mo.ex * mo.ex;
  const double var_m1 = mo.em1sq - mo.em1 * mo.em1;
  const double var_m0 = mo.em0sq - mo.em0 * mo.em0;
  const double var_y1 = mo.es1sq + var_m1;
  const double var_y0 = mo.es0sq + var_m0;
  const double var_cate = mo.em1sq - 2 * mo.em1m0 + mo.em0sq - tv.ate * tv.ate;

  tv.v_cr = var_y1 / pi + var_y0 / (1.0 - pi);
  tv.v_star = mo.es1sq / pi + mo.es0sq / (1.0 - pi) + var_cate;

  tv.gamma1 = (mo.em1x - mo.ex * mo.em1) / tv.sigma_x;
  tv.gamma0 = (mo.em0x - mo.ex * mo.em0) / tv.sigma_x;
  tv.gamma = pi * tv.gamma1 + (1.0 - pi) * tv.gamma0;
  tv.v_pool = tv.v_cr - tv.gamma * tv.gamma * tv.sigma_x / (pi * (1.0 - pi)) +
              2.0 * (2.0 * pi - 1.0) / (pi * (1.0 - pi)) * tv.gamma * tv.sigma_x *
                  (tv.gamma1 - tv.gamma0);

  // Interacted adjustment: the linear working-model errors a_d enter through
  // their second moments, all expressible in the basic moments.
  const double c1 = mo.em1 - tv.gamma1 * mo.ex;
  const double c0 = mo.em0 - tv.gamma0 * mo.ex;
  const double ea1sq = mo.em1sq + c1 * c1 + tv.gamma1 * tv.gamma1 * mo.exx -
                       2 * c1 * mo.em1 - 2 * tv.gamma1 * mo.em1x +
                       2 * c1 * tv.gamma1 * mo.ex;
  const double ea0sq = mo.em0sq + c0 * c0 + tv.gamma0 * tv.gamma0 * mo.exx -
                       2 * c0 * mo.em0 - 2 * tv.gamma0 * mo.em0x +
                       2 * c0 * tv.gamma0 * mo.ex;
  const double ea1a0 = mo.em1m0 - c1 * mo.em0 - tv.gamma1 * mo.em0x -
                       c0 * mo.em1 - tv.gamma0 * mo.em1x + c1 * c0 +
                       c1 * tv.gamma0 * mo.ex + tv.gamma1 * c0 * mo.ex +
                       tv.gamma1 * tv.gamma0 * mo.exx;
  tv.v_sat = mo.es1sq / pi + mo.es0sq / (1.0 - pi) + var_cate + ea1sq / pi +
             ea0sq / (1.0 - pi) - (ea1sq + ea0sq - 2 * ea1a0);

  if (dgp.discrete()) {
    const auto& dx = dgp.as_discrete();
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t j = 0; j < dx.values.size(); ++j)
      strata[dgp.stratum_label(static_cast<int>(j))].push_back(j);
    double within = 0.0, between = 0.0;
    for (const auto& [label, idx] : strata) {
      double ps = 0, m1s = 0, m0s = 0, y1sq = 0, y0sq = 0;
      for (std::size_t j : idx) ps += dx.probs[j];
      for (std::size_t j : idx) {
        const double w = dx.probs[j] / ps;
        m1s += w * dx.mean1[j];
        m0s += w * dx.mean0[j];
        y1sq += w * (dx.sd1[j] * dx.sd1[j] + dx.mean1[j] * dx.mean1[j]);
        y0sq += w * (dx.sd0[j] * dx.sd0[j] + dx.mean0[j] * dx.mean0[j]);
      }
      within += ps * ((y1sq - m1s * m1s) / pi + (y0sq - m0s * m0s) / (1.0 - pi));
      const double gap = (m1s - m0s) - tv.ate;
      between += ps * gap * gap;
    }
    tv.v_sbr = within + between;
  } else {
    // Continuous support: the finest stratification, so the stratified limit
    // coincides with the efficient variance.
    tv.v_sbr = tv.v_star;
  }

  const double fuzz = 1e-9 * (1.0 + std::fabs(tv.v_cr));
  if (tv.v_star > tv.v_sbr + fuzz || tv.v_sbr > tv.v_cr + fuzz ||
      tv.v_sat > tv.v_cr + fuzz || tv.v_star > tv.v_sat + fuzz)
    throw Error("theoretical_variances: variance ordering invariant violated");
  return tv;
}

void add_cluster_variances(TheoreticalVariances& tv, const ClusterDgp& dgp, double pi) {
  tv.v_eq = dgp.v_eq(pi);
  tv.v_size = dgp.v_size(pi);
}

double theoretical_sat_variance(const Dgp& dgp,
                                const std::map<std::string, double>& pi_by_stratum) {
  const auto& dx = dgp.as_discrete();
  check_discrete(dx);
  const double delta = dgp.ate();
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t j = 0; j < dx.values.size(); ++j)
    strata[dgp.stratum_label(static_cast<int>(j))].push_back(j);
  double total = 0.0;
  for (const auto& [label, idx] : strata) {
    auto it = pi_by_stratum.find(label);
    if (it == pi_by_stratum.end())
      throw MismatchError("theoretical_sat_variance: no share for stratum '" + label + "'");
    const double share = it->second;
    double ps = 0, m1s = 0, m0s = 0, y1sq = 0, y0sq = 0;
    for (std::size_t j : idx) ps += dx.probs[j];
    for (std::size_t j : idx) {
      const double w = dx.probs[j] / ps;
      m1s += w * dx.mean1[j];
      m0s += w * dx.mean0[j];
      y1sq += w * (dx.sd1[j] * dx.sd1[j] + dx.mean1[j] * dx.mean1[j]);
      y0sq += w * (dx.sd0[j] * dx.sd0[j] + dx.mean0[j] * dx.mean0[j]);
    }
    total += ps * ((y1sq - m1s * m1s) / share + (y0sq - m0s * m0s) / (1.0 - share));
    const double gap = (m1s - m0s) - delta;
    total += ps * gap * gap;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

CompleteEnumeration enumerate_complete(const PotentialPopulation& population, int n1) {
  const int n = population.size();
  if (n1 < 1 || n1 > n - 1)
    throw MismatchError("enumerate_complete: treated count must leave both arms nonempty");
  const long long count = choose(n, n1);
  if (count > 1'000'000)
    throw MismatchError("enumerate_complete: " + std::to_string(count) +
                        " assignments exceed the 10^6 enumeration cap");

  CompleteEnumeration out;
  out.assignments = count;
  out.fp_ate = population.fp_ate();

  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(count));
  const int n0 = n - n1;
  for_each_complete_assignment(n, n1, [&](const std::vector<int>& d) {
    KahanSum treated, control;
    for (int i = 0; i < n; ++i) {
      if (d[i] == 1)
        treated.add(population.y1[i]);
      else
        control.add(population.y0[i]);
    }
    estimates.push_back(treated.value() / n1 - control.value() / n0);
  });
  out.mean = kahan_mean(estimates);
  out.variance = kahan_population_variance(estimates, out.mean);

  // Closed form: S1^2/n1 + S0^2/n0 - SDelta^2/N with (N-1)-denominator
  // population variances.
  const double mean1 = kahan_mean(population.y1);
  const double mean0 = kahan_mean(population.y0);
  KahanSum s1, s0, sd;
  for (int i = 0; i < n; ++i) {
    const double d1 = population.y1[i] - mean1;
    const double d0 = population.y0[i] - mean0;
    s1.add(d1 * d1);
    s0.add(d0 * d0);
    const double effect_gap = (population.y1[i] - population.y0[i]) - out.fp_ate;
    sd.add(effect_gap * effect_gap);
  }
  out.closed_form = s1.value() / (n - 1) / n1 + s0.value() / (n - 1) / n0 -
                    sd.value() / (n - 1) / n;
  return out;
}

StratifiedEnumeration enumerate_stratified(const std::vector<std::string>& strata,
                                           const std::vector<double>& m1,
                                           const std::vector<double>& m0,
                                           const std::vector<double>& s1,
                                           const std::vector<double>& s0,
                                           const DesignSpec& design) {
  const int n = static_cast<int>(strata.size());
  if (static_cast<int>(m1.size()) != n || static_cast<int>(m0.size()) != n ||
      static_cast<int>(s1.size()) != n || static_cast<int>(s0.size()) != n)
    throw MismatchError("enumerate_stratified: one conditional moment per unit required");

  std::map<std::string, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[strata[i]].push_back(i);

  StratifiedEnumeration out;
  KahanSum ate_acc;
  for (int i = 0; i < n; ++i) ate_acc.add(m1[i] - m0[i]);
  const double conditional_ate = ate_acc.value() / n;
  {
    KahanSum acc;
    for (int i = 0; i < n; ++i) acc.add(s1[i] * s1[i] + s0[i] * s0[i]);
    out.design_independent_term = 2.0 / (static_cast<double>(n) * n) * acc.value();
  }

  const bool stratified_design = design.kind == DesignKind::StratifiedBlock;
  std::vector<double> cond_means, cond_vars, sat_means, sat_vars, biases;

  auto visit = [&](const std::vector<int>& d) {
    int n1 = 0;
    for (int v : d) n1 += v;
    const int n0 = n - n1;
    KahanSum mean_acc, var_acc;
    for (int i = 0; i < n; ++i) {
      if (d[i] == 1) {
        mean_acc.add(m1[i] / n1);
        var_acc.add(s1[i] * s1[i] / (static_cast<double>(n1) * n1));
      } else {
        mean_acc.add(-m0[i] / n0);
        var_acc.add(s0[i] * s0[i] / (static_cast<double>(n0) * n0));
      }
    }
    cond_means.push_back(mean_acc.value());
    cond_vars.push_back(var_acc.value());
    if (n1 == n0) {
      // Balanced form (1/n) sum (2d_i - 1)(m1_i + m0_i): algebraically the
      // same bias, and the terms cancel exactly when strata are balanced.
      KahanSum bias_acc;
      for (int i = 0; i < n; ++i)
        bias_acc.add((d[i] == 1 ? 1.0 : -1.0) * (m1[i] + m0[i]));
      biases.push_back(bias_acc.value() / n);
    } else {
      biases.push_back(mean_acc.value() - conditional_ate);
    }

    if (stratified_design) {
      KahanSum sat_mean, sat_var;
      for (const auto& [label, idx] : groups) {
        const double weight = static_cast<double>(idx.size()) / n;
        int n1x = 0;
        for (int i : idx) n1x += d[i];
        const int n0x = static_cast<int>(idx.size()) - n1x;
        for (int i : idx) {
          if (d[i] == 1) {
            sat_mean.add(weight * m1[i] / n1x);
            sat_var.add(weight * weight * s1[i] * s1[i] /
                        (static_cast<double>(n1x) * n1x));
          } else {
            sat_mean.add(-weight * m0[i] / n0x);
            sat_var.add(weight * weight * s0[i] * s0[i] /
                        (static_cast<double>(n0x) * n0x));
          }
        }
      }
      sat_means.push_back(sat_mean.value());
      sat_vars.push_back(sat_var.value());
    }

    for (const auto& [label, idx] : groups) {
      int imbalance_x = 0;
      for (int i : idx) imbalance_x += d[i] == 1 ? 1 : -1;
      ++out.imbalance_counts[label][imbalance_x];
    }
  };

  if (stratified_design) {
    std::vector<std::vector<std::vector<int>>> patterns;
    std::vector<std::vector<int>> positions;
    long long total = 1;
    for (const auto& [label, idx] : groups) {
      const int nx = static_cast<int>(idx.size());
      const int n1x = floor_count(design.pi_for(label), nx);
      if (n1x < 1 || n1x > nx - 1)
        throw MismatchError("enumerate_stratified: degenerate stratum '" + label + "'");
      const long long c = choose(nx, n1x);
      if (total > 1'000'000 / c)
        throw MismatchError("enumerate_stratified: assignment count exceeds the 10^6 cap");
      total *= c;
      patterns.push_back(local_patterns(nx, n1x));
      positions.push_back(idx);
    }
    out.assignments = total;
    for_each_product_assignment(patterns, positions, n, visit);
  } else {
    const int n1 = floor_count(design.pi, n);
    if (n1 < 1 || n1 > n - 1)
      throw MismatchError("enumerate_stratified: degenerate complete design");
    const long long count = choose(n, n1);
    if (count > 1'000'000)
      throw MismatchError("enumerate_stratified: " + std::to_string(count) +
                          " assignments exceed the 10^6 enumeration cap");
    out.assignments = count;
    for_each_complete_assignment(n, n1, visit);
  }

  out.mean_dim = kahan_mean(cond_means);
  out.mean_conditional_variance = kahan_mean(cond_vars);
  out.var_dim = out.mean_conditional_variance +
                kahan_population_variance(cond_means, out.mean_dim);
  {
    KahanSum acc;
    for (double b : biases) {
      acc.add(b * b);
      out.max_abs_bias_post = std::max(out.max_abs_bias_post, std::fabs(b));
    }
    out.mean_bias_post_sq = acc.value() / biases.size();
  }
  if (stratified_design) {
    out.mean_sat = kahan_mean(sat_means);
    out.var_sat = kahan_mean(sat_vars) +
                  kahan_population_variance(sat_means, out.mean_sat);
  } else {
    out.mean_sat = std::numeric_limits<double>::quiet_NaN();
    out.var_sat = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo engine
// ---------------------------------------------------------------------------

namespace {

struct Replicate {
  double estimate = 0.0;
  double variance = 0.0;
};

std::map<std::string, double> share_map(const McScenario& scenario,
                                        const std::vector<std::string>& labels) {
  std::map<std::string, double> shares = scenario.pi_by_stratum;
  for (const auto& label : labels) shares.emplace(label, scenario.pi);
  return shares;
}

Replicate run_individual_replicate(const McScenario& scenario, const Dgp& dgp,
                                   const std::string& variance_method, Rng& rng) {
  DrawnUnits units = draw_units(dgp, scenario.n, rng);
  Assignment assignment;
  std::vector<std::pair<int, int>> pairing;
  switch (scenario.design) {
    case DesignKind::Complete:
      assignment = assign_complete(scenario.n, scenario.pi, rng);
      break;
    case DesignKind::StratifiedBlock: {
      if (units.strata.empty())
        throw MismatchError("monte_carlo: stratified design needs a discrete dgp");
      assignment = assign_stratified_block(units.strata,
                                           share_map(scenario, units.strata), rng);
      break;
    }
    case DesignKind::MatchedPairs: {
      pairing = match_pairs(units.x);
      assignment = assign_matched_pairs(pairing, rng);
      break;
    }
    default:
      throw MismatchError("monte_carlo: design '" + design_kind_name(scenario.design) +
                          "' is not an individual-level design");
  }
  Sample sample = observe(units, assignment.d);
  if (scenario.design == DesignKind::MatchedPairs) {
    sample.pair_ids.assign(scenario.n, -1);
    for (std::size_t j = 0; j < pairing.size(); ++j) {
      sample.pair_ids[pairing[j].first] = static_cast<int>(j);
      sample.pair_ids[pairing[j].second] = static_cast<int>(j);
    }
    sample.strata.clear();  // pair ids carry the fine stratification
  }

  Replicate rep;
  FittedWorkingModel fitted;
  if (scenario.estimator == "dim") {
    rep.estimate = diff_in_means(sample);
  } else if (scenario.estimator == "sat") {
    rep.estimate = saturated_estimate(sample);
  } else if (scenario.estimator == "pooled") {
    rep.estimate = pooled_adjusted(sample);
  } else if (scenario.estimator == "lin") {
    rep.estimate = lin_interacted(sample);
    fitted = working_models::linear().fit(sample);
  } else if (scenario.estimator == "aipw") {
    fitted = working_models::by_name(scenario.aipw_model).fit(sample);
    rep.estimate = aipw(sample, scenario.pi, fitted);
  } else {
    throw MismatchError("monte_carlo: unknown estimator '" + scenario.estimator + "'");
  }

  if (variance_method == "robust") {
    rep.variance = arm_robust_variance(sample);
  } else if (variance_method == "sbr") {
    rep.variance = sbr_variance(sample, share_map(scenario, sample.strata));
  } else if (variance_method == "strat-fp") {
    rep.variance = design_based_strat_variance(sample, share_map(scenario, sample.strata));
  } else if (variance_method == "pairs") {
    rep.variance = matched_pairs_variance(sample);
  } else if (variance_method == "pooled-robust") {
    rep.variance = pooled_robust_variance(sample);
  } else if (variance_method == "influence") {
    if (!fitted.mu) fitted = working_models::linear().fit(sample);
    rep.variance = adjusted_influence_variance(sample, scenario.pi, fitted);
  } else {
    throw MismatchError("monte_carlo: unknown variance method '" + variance_method + "'");
  }
  return rep;
}

Replicate run_cluster_replicate(const McScenario& scenario, const ClusterDgp& dgp,
                                const std::string& variance_method, Rng& rng) {
  if (scenario.design != DesignKind::ClusterComplete &&
      scenario.design != DesignKind::Complete)
    throw MismatchError("monte_carlo: cluster dgps support cluster-level complete "
                        "randomization");
  DrawnClusters clusters = draw_clusters(dgp, scenario.n, rng);
  DesignSpec spec;
  spec.kind = DesignKind::ClusterComplete;
  spec.pi = scenario.pi;
  ClusterSample observed;
  {
    ClusterSample shell;  // assign_clusters only needs the cluster count
    shell.ids.resize(scenario.n);
    shell.n_true = clusters.n_true;
    shell.members.resize(scenario.n, std::vector<double>{0.0});
    shell.d.assign(scenario.n, 0);
    Assignment assignment = assign_clusters(shell, spec, rng);
    observed = observe(clusters, assignment.d);
  }

  Replicate rep;
  if (scenario.estimator == "cluster-eq") {
    rep.estimate = cluster_eq(observed);
  } else if (scenario.estimator == "cluster-size") {
    rep.estimate = cluster_size(observed);
  } else if (scenario.estimator == "dim") {
    rep.estimate = flattened_diff_in_means(observed);
  } else {
    throw MismatchError("monte_carlo: estimator '" + scenario.estimator +
                        "' is not available for cluster dgps");
  }

  if (variance_method == "cluster-eq") {
    rep.variance = cluster_eq_variance(observed);
  } else if (variance_method == "cluster-size") {
    rep.variance = cluster_size_variance(observed, scenario.pi);
  } else if (variance_method == "robust") {
    std::vector<double> flat_y;
    std::vector<int> flat_d;
    for (int g = 0; g < observed.size(); ++g)
      for (double value : observed.members[g]) {
        flat_y.push_back(value);
        flat_d.push_back(observed.d[g]);
      }
    rep.variance = arm_robust_variance(flat_y, flat_d);
  } else {
    throw MismatchError("monte_carlo: unknown cluster variance method '" +
                        variance_method + "'");
  }
  return rep;
}

}  // namespace

McReport monte_carlo(const McScenario& scenario) {
  if (scenario.replications < 100)
    throw MismatchError("monte_carlo: at least 100 replications required");

  const bool cluster = std::holds_alternative<ClusterDgp>(scenario.dgp);
  std::string variance_method = scenario.variance;
  if (variance_method == "auto")
    variance_method = auto_variance_method(
        scenario.estimator,
        !cluster && std::holds_alternative<Dgp>(scenario.dgp) &&
            std::get<Dgp>(scenario.dgp).discrete() &&
            scenario.design == DesignKind::StratifiedBlock,
        scenario.design == DesignKind::MatchedPairs, cluster);

  // Design/estimator/variance compatibility is validated up front so a bad
  // scenario fails before burning replications.
  if (variance_method == "pairs" && scenario.design != DesignKind::MatchedPairs)
    throw MismatchError("monte_carlo: the matched-pairs variance requires a "
                        "matched-pairs design");
  if ((variance_method == "sbr" || variance_method == "strat-fp") &&
      scenario.design != DesignKind::StratifiedBlock)
    throw MismatchError("monte_carlo: stratified variance methods require a "
                        "stratified design");

  double target = 0.0;
  if (cluster) {
    const auto& dgp = std::get<ClusterDgp>(scenario.dgp);
    if (scenario.estimator == "cluster-eq")
      target = dgp.delta_eq();
    else if (scenario.estimator == "cluster-size")
      target = dgp.delta_size();
    else
      target = dgp.theta();
  } else {
    target = std::get<Dgp>(scenario.dgp).ate();
  }

  std::vector<double> estimates, variance_estimates;
  estimates.reserve(scenario.replications);
  variance_estimates.reserve(scenario.replications);
  long long covered = 0;
  for (int r = 0; r < scenario.replications; ++r) {
    Rng rng(derive_seed(scenario.seed, static_cast<std::uint64_t>(r)));
    const Replicate rep =
        cluster ? run_cluster_replicate(scenario, std::get<ClusterDgp>(scenario.dgp),
                                        variance_method, rng)
                : run_individual_replicate(scenario, std::get<Dgp>(scenario.dgp),
                                           variance_method, rng);
    estimates.push_back(rep.estimate);
    variance_estimates.push_back(rep.variance);
    const auto [lo, hi] = confidence_interval(rep.estimate, rep.variance, scenario.level);
    if (target >= lo && target <= hi) ++covered;
  }

  McReport report;
  report.name = scenario.name;
  report.design = design_kind_name(scenario.design);
  report.estimator = scenario.estimator;
  report.variance = variance_method;
  report.n = scenario.n;
  report.replications = scenario.replications;
  report.target = target;

  const double r = scenario.replications;
  report.mean_estimate = kahan_mean(estimates);
  report.bias = report.mean_estimate - target;
  const double m2 = kahan_population_variance(estimates, report.mean_estimate);
  report.mcse_bias = std::sqrt(m2 / r);
  report.emp_variance = m2 * r / (r - 1.0);
  KahanSum fourth;
  for (double e : estimates) {
    const double centered = e - report.mean_estimate;
    fourth.add(centered * centered * centered * centered);
  }
  const double m4 = fourth.value() / r;
  report.mcse_emp_variance = std::sqrt(std::max(0.0, m4 - m2 * m2) / r);
  report.mean_variance_estimate = kahan_mean(variance_estimates);
  report.coverage = covered / r;
  report.mcse_coverage = std::sqrt(report.coverage * (1.0 - report.coverage) / r);
  return report;
}

// ---------------------------------------------------------------------------
// Finite-population gap
// ---------------------------------------------------------------------------

GapReport finite_pop_gap(const Dgp& dgp, int n, int n1, long N, int populations,
                         std::uint64_t seed) {
  if (n > N) throw MismatchError("finite_pop_gap: need n <= N");
  if (n1 < 1 || n1 > n - 1)
    throw MismatchError("finite_pop_gap: treated count must leave both arms nonempty");
  if (populations < 1) throw MismatchError("finite_pop_gap: need at least one population");

  const BasicMoments mo = basic_moments(dgp);
  const double var_y1 = mo.es1sq + mo.em1sq - mo.em1 * mo.em1;
  const double var_y0 = mo.es0sq + mo.em0sq - mo.em0 * mo.em0;
  const double var_delta = dgp.treatment_effect_variance();
  const int n0 = n - n1;

  std::vector<double> gaps, gaps_law;
  gaps.reserve(populations);
  gaps_law.reserve(populations);
  for (int p = 0; p < populations; ++p) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
    KahanSum sum1, sum0;
    std::vector<double> y1(N), y0(N);
    for (long i = 0; i < N; ++i) {
      const Dgp::Draw draw = dgp.draw(rng);
      y1[i] = draw.y1;
      y0[i] = draw.y0;
      sum1.add(draw.y1);
      sum0.add(draw.y0);
    }
    const double mean1 = sum1.value() / N;
    const double mean0 = sum0.value() / N;
    KahanSum s1, s0, sd;
    for (long i = 0; i < N; ++i) {
      s1.add((y1[i] - mean1) * (y1[i] - mean1));
      s0.add((y0[i] - mean0) * (y0[i] - mean0));
      const double gap = (y1[i] - y0[i]) - (mean1 - mean0);
      sd.add(gap * gap);
    }
    const double s1sq = s1.value() / (N - 1);
    const double s0sq = s0.value() / (N - 1);
    const double sdsq = sd.value() / (N - 1);
    const double var_fp = s1sq / n1 + s0sq / n0 - sdsq / N;
    gaps.push_back(n * (s1sq / n1 + s0sq / n0) - n * var_fp);
    gaps_law.push_back(n * (var_y1 / n1 + var_y0 / n0) - n * var_fp);
  }

  GapReport report;
  report.lambda = static_cast<double>(n) / N;
  report.populations = populations;
  report.reference = report.lambda * var_delta;
  report.gap = kahan_mean(gaps);
  report.gap_law = kahan_mean(gaps_law);
  if (populations > 1) {
    report.gap_mcse = std::sqrt(kahan_population_variance(gaps, report.gap) /
                                (populations - 1.0));
    report.gap_law_mcse = std::sqrt(
        kahan_population_variance(gaps_law, report.gap_law) / (populations - 1.0));
  }
  return report;
}

}  // namespace rct
