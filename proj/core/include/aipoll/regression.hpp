#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace aipoll {

// ---------------------------------------------------------------------------
// Question-partitioned split
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
};

struct QuestionSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;

  bool in_test(const std::string& question_id) const;
};

/// Shuffles the sorted distinct ids with the seeded generator and sends
/// ceil(test_fraction * n) of them (at least 1, at most n - 1) to test.
/// Throws Error(InvalidArgument) for fewer than two questions.
QuestionSplit split_questions(std::span<const std::string> question_ids, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Bayesian ridge
// ---------------------------------------------------------------------------

struct RidgeOptions {
  int max_iter = 300;
  double tol = 1e-3;
  /// Gamma hyperprior shape/rate on both precisions.
  double alpha_1 = 1e-6;
  double alpha_2 = 1e-6;
  double lambda_1 = 1e-6;
  double lambda_2 = 1e-6;
  /// Pin a precision instead of estimating it.
  std::optional<double> fixed_alpha;
  std::optional<double> fixed_lambda;
};

struct RidgeFit {
  double intercept = 0.0;
  Eigen::VectorXd weights;
  Eigen::MatrixXd posterior_cov;
  /// Noise precision.
  double alpha = 1.0;
  /// Weight precision.
  double lambda = 1.0;
  int n_iter = 0;
  bool converged = false;
  Eigen::VectorXd x_mean;

  nlohmann::json to_json() const;
  static RidgeFit from_json(const nlohmann::json& j);
};

/// Evidence maximization. X and y are centred internally; the intercept
/// restores the offsets.
RidgeFit fit_bayesian_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeOptions& options = {});

/// log p(y | X, alpha, lambda) of the centred problem, hyperpriors excluded.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha, double lambda);

struct RidgePrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

RidgePrediction predict_ridge(const RidgeFit& fit, const Eigen::MatrixXd& X);

struct Coefficient {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  bool significant = false;
};

/// |mean| >= 1.96 posterior SD, in layout order.
std::vector<Coefficient> significant_coefficients(const RidgeFit& fit, std::span<const std::string> names);

// ---------------------------------------------------------------------------
// Gradient boosting
// ---------------------------------------------------------------------------

struct GbmOptions {
  int n_trees = 300;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 5;
};

struct TreeNode {
  /// -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct GbmFit {
  GbmOptions options;
  double init = 0.0;
  std::vector<RegressionTree> trees;
  /// Training MSE before the first tree and after each one.
  std::vector<double> train_loss;
  int n_features = 0;

  nlohmann::json to_json() const;
  static GbmFit from_json(const nlohmann::json& j);
};

/// Squared-loss boosting of depth-limited exact-greedy trees. Stops early
/// once no split improves the residuals.
GbmFit fit_gbm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbmOptions& options = {});
Eigen::VectorXd predict_gbm(const GbmFit& fit, const Eigen::MatrixXd& X);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// 1 - SSE/SST around the evaluation set's own mean; nullopt when the
/// target has no variance.
std::optional<double> r_squared(std::span<const double> y, std::span<const double> prediction);
std::optional<double> r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& prediction);

}  // namespace aipoll
