#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "lrgp/gp.hpp"
#include "lrgp/kernels.hpp"
#include "lrgp/mercer.hpp"
#include "lrgp/rng.hpp"

namespace {

Eigen::MatrixXd random_matrix(lrgp::Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  }
  return m;
}

void LowRankSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int r = 50;
  lrgp::Rng rng(7);
  const Eigen::MatrixXd xi = random_matrix(rng, n, r);
  const Eigen::MatrixXd v = random_matrix(rng, n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lrgp::lowrank_solve(xi, 0.5, v));
  }
  state.SetComplexityN(n);
}
BENCHMARK(LowRankSolve)->RangeMultiplier(2)->Range(1 << 10, 1 << 15)->Complexity();

void DenseSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int r = 50;
  lrgp::Rng rng(7);
  const Eigen::MatrixXd xi = random_matrix(rng, n, r);
  const Eigen::MatrixXd v = random_matrix(rng, n, 1);
  for (auto _ : state) {
    Eigen::MatrixXd a = xi * xi.transpose();
    a.diagonal().array() += 0.5;
    benchmark::DoNotOptimize(Eigen::MatrixXd(a.llt().solve(v)));
  }
  state.SetComplexityN(n);
}
BENCHMARK(DenseSolve)->RangeMultiplier(2)->Range(1 << 10, 1 << 12)->Complexity();

void LowRankLogMarginal(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  lrgp::Rng rng(11);
  auto model = lrgp::LowRankGPModel::fgp(4, 50, 0.3, 42);
  const Eigen::MatrixXd x = random_matrix(rng, n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lrgp::log_marginal_likelihood(model, x, y));
  }
  state.SetComplexityN(n);
}
BENCHMARK(LowRankLogMarginal)
    ->RangeMultiplier(2)
    ->Range(1 << 10, 1 << 15)
    ->Complexity();

void MercerFeatureMatrix(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  lrgp::Rng rng(13);
  const auto sys = lrgp::make_isotropic_eigen_system(3, 1.0, 1.0, 1.0, 64);
  const Eigen::MatrixXd z = random_matrix(rng, n, 3) * 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lrgp::truncated_feature_matrix(z, sys, 64));
  }
  state.SetComplexityN(n);
}
BENCHMARK(MercerFeatureMatrix)
    ->RangeMultiplier(4)
    ->Range(1 << 10, 1 << 14)
    ->Complexity();

void GradientLogMarginal(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  lrgp::Rng rng(17);
  auto model = lrgp::LowRankGPModel::mgp(3, 32, 0.3);
  const Eigen::MatrixXd x = random_matrix(rng, n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lrgp::gradient_log_ml(model, x, y));
  }
  state.SetComplexityN(n);
}
BENCHMARK(GradientLogMarginal)
    ->RangeMultiplier(4)
    ->Range(1 << 10, 1 << 14)
    ->Complexity();

}  // namespace

BENCHMARK_MAIN();
