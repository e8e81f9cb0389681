#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "aipoll/error.hpp"
#include "aipoll/regression.hpp"

namespace aipoll {
namespace {

void require_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw Error(ErrorCode::Shape, "X and y differ in row count");
  if (X.rows() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 rows to fit");
  if (!y.allFinite() || !X.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite training data");
}

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

RidgeFit fit_bayesian_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeOptions& options) {
  require_rows(X, y);
  const auto n = static_cast<double>(X.rows());

  const Eigen::VectorXd x_mean = X.colwise().mean().transpose();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean.transpose();
  const Eigen::VectorXd yc = y.array() - y_mean;

  // One eigendecomposition of the Gram matrix serves every precision update:
  // (alpha XtX + lambda I)^-1 = V diag(1 / (alpha s + lambda)) Vt.
  const Eigen::MatrixXd gram = Xc.transpose() * Xc;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::InvalidArgument, "eigendecomposition failed");
  const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::VectorXd z = V.transpose() * (Xc.transpose() * yc);

  const double var_y = yc.squaredNorm() / n;
  double alpha = options.fixed_alpha.value_or(1.0 / (var_y + std::numeric_limits<double>::epsilon()));
  double lambda = options.fixed_lambda.value_or(1.0);
  if (!(alpha > 0.0) || !(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "precisions must be positive");

  auto weights_for = [&](double a, double l) -> Eigen::VectorXd {
    return V * (a * z.array() / (a * s.array() + l)).matrix();
  };

  RidgeFit fit;
  fit.x_mean = x_mean;
  const bool both_fixed = options.fixed_alpha && options.fixed_lambda;
  if (both_fixed) fit.converged = true;
  for (int it = 0; !both_fixed && it < options.max_iter; ++it) {
    const Eigen::VectorXd w = weights_for(alpha, lambda);
    const double gamma = (alpha * s.array() / (alpha * s.array() + lambda)).sum();
    const double sse = (yc - Xc * w).squaredNorm();
    const double new_lambda =
        options.fixed_lambda ? lambda : (gamma + 2.0 * options.lambda_1) / (w.squaredNorm() + 2.0 * options.lambda_2);
    const double new_alpha =
        options.fixed_alpha ? alpha : (n - gamma + 2.0 * options.alpha_1) / (sse + 2.0 * options.alpha_2);
    const double d_lambda = std::abs(new_lambda - lambda) / lambda;
    const double d_alpha = std::abs(new_alpha - alpha) / alpha;
    alpha = new_alpha;
    lambda = new_lambda;
    fit.n_iter = it + 1;
    if (d_lambda < options.tol && d_alpha < options.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.alpha = alpha;
  fit.lambda = lambda;
  fit.weights = weights_for(alpha, lambda);
  fit.posterior_cov = V * (1.0 / (alpha * s.array() + lambda)).matrix().asDiagonal() * V.transpose();
  fit.posterior_cov = 0.5 * (fit.posterior_cov + fit.posterior_cov.transpose()).eval();
  fit.intercept = y_mean - x_mean.dot(fit.weights);
  return fit;
}

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha, double lambda) {
  require_rows(X, y);
  const auto n = static_cast<double>(X.rows());
  const auto p = static_cast<double>(X.cols());
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Xc.transpose() * Xc);
  const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::VectorXd w = V * (alpha * (V.transpose() * (Xc.transpose() * yc)).array() / (alpha * s.array() + lambda)).matrix();
  const double sse = (yc - Xc * w).squaredNorm();
  const double logdet_a = (alpha * s.array() + lambda).log().sum();
  return 0.5 * (p * std::log(lambda) + n * std::log(alpha) - alpha * sse - lambda * w.squaredNorm() - logdet_a -
                n * std::log(2.0 * std::numbers::pi));
}

RidgePrediction predict_ridge(const RidgeFit& fit, const Eigen::MatrixXd& X) {
  if (X.cols() != fit.weights.size()) {
    throw Error(ErrorCode::Shape, "predict_ridge: expected " + std::to_string(fit.weights.size()) + " columns, got " +
                                      std::to_string(X.cols()));
  }
  RidgePrediction out;
  out.mean = (X * fit.weights).array() + fit.intercept;
  const Eigen::VectorXd quad = ((X * fit.posterior_cov).array() * X.array()).rowwise().sum();
  out.sd = (quad.array().max(0.0) + 1.0 / fit.alpha).sqrt();
  return out;
}

std::vector<Coefficient> significant_coefficients(const RidgeFit& fit, std::span<const std::string> names) {
  if (names.size() != static_cast<std::size_t>(fit.weights.size())) {
    throw Error(ErrorCode::Shape, "significant_coefficients: name count does not match weights");
  }
  std::vector<Coefficient> out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    Coefficient c;
    c.name = names[j];
    c.mean = fit.weights(jj);
    c.sd = std::sqrt(std::max(0.0, fit.posterior_cov(jj, jj)));
    c.significant = std::abs(c.mean) >= 1.96 * c.sd;
    out.push_back(std::move(c));
  }
  return out;
}

nlohmann::json RidgeFit::to_json() const {
  std::vector<std::vector<double>> cov;
  for (Eigen::Index i = 0; i < posterior_cov.rows(); ++i) {
    const Eigen::VectorXd row = posterior_cov.row(i).transpose();
    cov.emplace_back(row.data(), row.data() + row.size());
  }
  return {{"intercept", intercept}, {"weights", vec_json(weights)}, {"posterior_cov", cov},
          {"alpha", alpha},         {"lambda", lambda},             {"n_iter", n_iter},
          {"converged", converged}, {"x_mean", vec_json(x_mean)}};
}

RidgeFit RidgeFit::from_json(const nlohmann::json& j) {
  RidgeFit f;
  try {
    f.intercept = j.at("intercept").get<double>();
    f.weights = vec_from(j.at("weights"));
    f.x_mean = vec_from(j.at("x_mean"));
    f.alpha = j.at("alpha").get<double>();
    f.lambda = j.at("lambda").get<double>();
    f.n_iter = j.at("n_iter").get<int>();
    f.converged = j.at("converged").get<bool>();
    const auto& cov = j.at("posterior_cov");
    const auto p = f.weights.size();
    if (static_cast<Eigen::Index>(cov.size()) != p) throw Error(ErrorCode::Shape, "ridge: covariance size mismatch");
    f.posterior_cov.resize(p, p);
    for (Eigen::Index r = 0; r < p; ++r) {
      const auto row = cov.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != p) throw Error(ErrorCode::Shape, "ridge: covariance row size mismatch");
      for (Eigen::Index c = 0; c < p; ++c) f.posterior_cov(r, c) = row[static_cast<std::size_t>(c)];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("ridge model: ") + e.what());
  }
  return f;
}

}  // namespace aipoll
