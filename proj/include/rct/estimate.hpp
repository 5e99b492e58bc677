#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rct/model.hpp"

namespace rct {

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;              // on the original (unweighted) rows
  std::vector<std::string> column_labels;
};

// Weighted least squares via a column-pivoted Householder QR factorization.
// Rank deficiency is a hard error naming the collinear columns; columns are
// never dropped silently.
LeastSquaresFit least_squares(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& columns,
                              const std::vector<std::string>& labels,
                              const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// mean(Y | D=1) - mean(Y | D=0).
double diff_in_means(const Sample& sample);
double diff_in_means(const std::vector<double>& y, const std::vector<int>& d);

// Stratum-size weighted average of stratum-level difference-in-means.
double saturated_estimate(const Sample& sample);

// D coefficient from a regression of Y on (constant, D, X).
double pooled_adjusted(const Sample& sample);

// D coefficient from a regression of Y on (constant, D, X, D*(X - Xbar)),
// with Xbar the full-sample covariate mean recomputed from the data.
double lin_interacted(const Sample& sample);

// A fitted working model: arm-wise predictors of the outcome from covariates.
struct FittedWorkingModel {
  std::string name;
  std::function<double(int d, const Eigen::VectorXd& x)> mu;
};

// A working-model family: fit on a sample, predict per arm. The predictor
// must be total on the sample's covariate space.
struct WorkingModel {
  std::string name;
  std::function<FittedWorkingModel(const Sample&)> fit;
};

namespace working_models {
// mu_d identically zero (turns the AIPW moment into Horvitz-Thompson).
WorkingModel zero();
// mu_d = arm mean of the observed outcomes.
WorkingModel arm_mean();
// mu_d(x) = (x - Xbar)' gamma_d, with gamma_d the covariate slope from an
// arm-d regression of Y on (constant, X) and Xbar the full-sample mean.
WorkingModel linear();
WorkingModel by_name(const std::string& name);
}  // namespace working_models

// Augmented inverse-propensity weighted estimator with the design share pi
// (known by design, never estimated from the data).
double aipw(const Sample& sample, double pi, const WorkingModel& model);
double aipw(const Sample& sample, double pi, const FittedWorkingModel& fitted);

// True iff the supplied design share disagrees with the realized treated
// share by more than 1/n; reports should note this.
bool aipw_pi_mismatch(const Sample& sample, double pi);

// Difference in means of cluster-average outcomes (clusters as units).
double cluster_eq(const ClusterSample& clusters);

// Cluster-size weighted difference in means; identical to the D coefficient
// of a weighted least-squares fit on individual rows with weights N_g/|M_g|.
double cluster_size(const ClusterSample& clusters);

// Individual-row difference in means on clustered data (its limit is the
// sample-weighted effect, not Delta_eq or Delta_size).
double flattened_diff_in_means(const ClusterSample& clusters);

}  // namespace rct
