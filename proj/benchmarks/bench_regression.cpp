#include <benchmark/benchmark.h>

#include <random>

#include "aipoll/regression.hpp"

using namespace aipoll;

namespace {

void make_problem(int n, int p, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z(0, 1);
  X.resize(n, p);
  y.resize(n);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(gen);
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(p, -1.0, 1.0);
  y = X * w;
  for (int i = 0; i < n; ++i) y(i) += 0.1 * z(gen);
}

void BM_BayesianRidge(benchmark::State& state) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_problem(1680, static_cast<int>(state.range(0)), X, y);
  for (auto _ : state) benchmark::DoNotOptimize(fit_bayesian_ridge(X, y));
}
BENCHMARK(BM_BayesianRidge)->Arg(110)->Arg(710)->Unit(benchmark::kMillisecond);

void BM_Gbm(benchmark::State& state) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_problem(1680, 110, X, y);
  GbmOptions opt;
  opt.n_trees = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_gbm(X, y, opt));
}
BENCHMARK(BM_Gbm)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
