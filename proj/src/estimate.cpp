#include "rct/estimate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "rct/errors.hpp"

namespace rct {

namespace {

void require_both_arms(const Sample& sample) {
  if (sample.n_treated() < 1 || sample.n_control() < 1)
    throw MismatchError("empty arm: need at least one treated and one control unit");
}

void require_covariates(const Sample& sample) {
  if (sample.k() < 1)
    throw MismatchError("estimator requires covariates, but the sample has none");
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

}  // namespace

LeastSquaresFit least_squares(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& columns,
                              const std::vector<std::string>& labels,
                              const std::optional<Eigen::VectorXd>& weights) {
  const long n = columns.rows();
  const long p = columns.cols();
  if (y.size() != n)
    throw MismatchError("least_squares: row count of the design differs from len(y)");
  if (labels.size() != static_cast<std::size_t>(p))
    throw MismatchError("least_squares: one label per column required");

  Eigen::MatrixXd a = columns;
  Eigen::VectorXd b = y;
  if (weights) {
    if (weights->size() != n)
      throw MismatchError("least_squares: one weight per row required");
    for (long i = 0; i < n; ++i) {
      if ((*weights)[i] < 0.0)
        throw MismatchError("least_squares: weights must be nonnegative");
      const double w = std::sqrt((*weights)[i]);
      a.row(i) *= w;
      b[i] *= w;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < p) {
    const auto perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "least_squares: design matrix is rank deficient; collinear columns:";
    for (long j = qr.rank(); j < p; ++j) msg << " " << labels[perm[j]];
    throw MismatchError(msg.str());
  }

  LeastSquaresFit fit;
  fit.coefficients = qr.solve(b);
  fit.residuals = y - columns * fit.coefficients;
  fit.column_labels = labels;
  return fit;
}

double diff_in_means(const std::vector<double>& y, const std::vector<int>& d) {
  double s1 = 0.0, s0 = 0.0;
  long n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (d[i] == 1) {
      s1 += y[i];
      ++n1;
    } else {
      s0 += y[i];
      ++n0;
    }
  }
  if (n1 < 1 || n0 < 1) throw MismatchError("empty arm");
  return s1 / n1 - s0 / n0;
}

double diff_in_means(const Sample& sample) { return diff_in_means(sample.y, sample.d); }

double saturated_estimate(const Sample& sample) {
  if (!sample.has_strata())
    throw MismatchError("saturated_estimate: sample has no stratum labels");
  std::map<std::string, std::array<double, 4>> acc;  // sum1, n1, sum0, n0
  for (int i = 0; i < sample.n(); ++i) {
    auto& cell = acc[sample.strata[i]];
    if (sample.d[i] == 1) {
      cell[0] += sample.y[i];
      cell[1] += 1;
    } else {
      cell[2] += sample.y[i];
      cell[3] += 1;
    }
  }
  double estimate = 0.0;
  for (const auto& [label, cell] : acc) {
    if (cell[1] < 1 || cell[3] < 1)
      throw MismatchError("saturated_estimate: stratum '" + label + "' has an empty arm");
    const double nx = cell[1] + cell[3];
    estimate += nx / sample.n() * (cell[0] / cell[1] - cell[2] / cell[3]);
  }
  return estimate;
}

namespace {

// Design matrix (constant, D, X).
std::pair<Eigen::MatrixXd, std::vector<std::string>> pooled_design(const Sample& sample) {
  const int n = sample.n();
  const int k = sample.k();
  Eigen::MatrixXd columns(n, 2 + k);
  std::vector<std::string> labels = {"const", "d"};
  for (int i = 0; i < n; ++i) {
    columns(i, 0) = 1.0;
    columns(i, 1) = sample.d[i];
  }
  for (int j = 0; j < k; ++j) {
    columns.col(2 + j) = sample.x.col(j);
    labels.push_back("x" + std::to_string(j + 1));
  }
  return {columns, labels};
}

}  // namespace

double pooled_adjusted(const Sample& sample) {
  require_covariates(sample);
  require_both_arms(sample);
  auto [columns, labels] = pooled_design(sample);
  return least_squares(to_vector(sample.y), columns, labels).coefficients[1];
}

double lin_interacted(const Sample& sample) {
  require_covariates(sample);
  require_both_arms(sample);
  const int n = sample.n();
  const int k = sample.k();
  const Eigen::RowVectorXd xbar = sample.x.colwise().mean();
  Eigen::MatrixXd columns(n, 2 + 2 * k);
  std::vector<std::string> labels = {"const", "d"};
  for (int i = 0; i < n; ++i) {
    columns(i, 0) = 1.0;
    columns(i, 1) = sample.d[i];
  }
  for (int j = 0; j < k; ++j) {
    columns.col(2 + j) = sample.x.col(j);
    labels.push_back("x" + std::to_string(j + 1));
  }
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i)
      columns(i, 2 + k + j) = sample.d[i] * (sample.x(i, j) - xbar[j]);
    labels.push_back("d:x" + std::to_string(j + 1) + "c");
  }
  return least_squares(to_vector(sample.y), columns, labels).coefficients[1];
}

namespace working_models {

WorkingModel zero() {
  WorkingModel model;
  model.name = "zero";
  model.fit = [](const Sample&) {
    return FittedWorkingModel{"zero", [](int, const Eigen::VectorXd&) { return 0.0; }};
  };
  return model;
}

WorkingModel arm_mean() {
  WorkingModel model;
  model.name = "arm-mean";
  model.fit = [](const Sample& sample) {
    require_both_arms(sample);
    double mean[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    for (int i = 0; i < sample.n(); ++i) {
      mean[sample.d[i]] += sample.y[i];
      ++count[sample.d[i]];
    }
    mean[0] /= count[0];
    mean[1] /= count[1];
    return FittedWorkingModel{
        "arm-mean",
        [m0 = mean[0], m1 = mean[1]](int d, const Eigen::VectorXd&) {
          return d == 1 ? m1 : m0;
        }};
  };
  return model;
}

WorkingModel linear() {
  WorkingModel model;
  model.name = "linear";
  model.fit = [](const Sample& sample) {
    require_covariates(sample);
    require_both_arms(sample);
    const int k = sample.k();
    const Eigen::RowVectorXd xbar = sample.x.colwise().mean();
    Eigen::MatrixXd gamma(k, 2);
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<int> rows;
      for (int i = 0; i < sample.n(); ++i)
        if (sample.d[i] == arm) rows.push_back(i);
      Eigen::MatrixXd columns(rows.size(), 1 + k);
      Eigen::VectorXd y(rows.size());
      std::vector<std::string> labels = {"const"};
      for (int j = 0; j < k; ++j) labels.push_back("x" + std::to_string(j + 1));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        columns(r, 0) = 1.0;
        columns.row(r).segment(1, k) = sample.x.row(rows[r]);
        y[r] = sample.y[rows[r]];
      }
      gamma.col(arm) = least_squares(y, columns, labels).coefficients.segment(1, k);
    }
    return FittedWorkingModel{
        "linear",
        [gamma, xbar](int d, const Eigen::VectorXd& x) {
          return (x.transpose() - xbar).dot(gamma.col(d));
        }};
  };
  return model;
}

WorkingModel by_name(const std::string& name) {
  if (name == "zero") return zero();
  if (name == "arm-mean") return arm_mean();
  if (name == "linear") return linear();
  throw MismatchError("unknown working model '" + name + "'");
}

}  // namespace working_models

double aipw(const Sample& sample, double pi, const FittedWorkingModel& fitted) {
  if (!(pi > 0.0 && pi < 1.0))
    throw MismatchError("aipw: design share pi must lie strictly in (0,1)");
  require_both_arms(sample);
  const int n = sample.n();
  double total = 0.0;
  Eigen::VectorXd xi(sample.k());
  for (int i = 0; i < n; ++i) {
    if (sample.k() > 0) xi = sample.x.row(i).transpose();
    const double mu1 = fitted.mu(1, xi);
    const double mu0 = fitted.mu(0, xi);
    double term = mu1 - mu0;
    if (sample.d[i] == 1)
      term += (sample.y[i] - mu1) / pi;
    else
      term -= (sample.y[i] - mu0) / (1.0 - pi);
    total += term;
  }
  return total / n;
}

double aipw(const Sample& sample, double pi, const WorkingModel& model) {
  return aipw(sample, pi, model.fit(sample));
}

bool aipw_pi_mismatch(const Sample& sample, double pi) {
  const double realized = static_cast<double>(sample.n_treated()) / sample.n();
  return std::fabs(pi - realized) > 1.0 / sample.n() + 1e-12;
}

namespace {

void require_both_cluster_arms(const ClusterSample& clusters) {
  const int t = clusters.treated_count();
  if (t < 1 || clusters.size() - t < 1)
    throw MismatchError("empty arm at cluster level");
}

}  // namespace

double cluster_eq(const ClusterSample& clusters) {
  require_both_cluster_arms(clusters);
  double s1 = 0.0, s0 = 0.0;
  long g1 = 0, g0 = 0;
  for (int g = 0; g < clusters.size(); ++g) {
    if (clusters.d[g] == 1) {
      s1 += clusters.ybar(g);
      ++g1;
    } else {
      s0 += clusters.ybar(g);
      ++g0;
    }
  }
  return s1 / g1 - s0 / g0;
}

double cluster_size(const ClusterSample& clusters) {
  require_both_cluster_arms(clusters);
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (int g = 0; g < clusters.size(); ++g) {
    const double ng = clusters.n_true[g];
    if (clusters.d[g] == 1) {
      num1 += clusters.ybar(g) * ng;
      den1 += ng;
    } else {
      num0 += clusters.ybar(g) * ng;
      den0 += ng;
    }
  }
  return num1 / den1 - num0 / den0;
}

double flattened_diff_in_means(const ClusterSample& clusters) {
  double s1 = 0.0, s0 = 0.0;
  long n1 = 0, n0 = 0;
  for (int g = 0; g < clusters.size(); ++g) {
    for (double value : clusters.members[g]) {
      if (clusters.d[g] == 1) {
        s1 += value;
        ++n1;
      } else {
        s0 += value;
        ++n0;
      }
    }
  }
  if (n1 < 1 || n0 < 1) throw MismatchError("empty arm");
  return s1 / n1 - s0 / n0;
}

}  // namespace rct
