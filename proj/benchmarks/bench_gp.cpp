#include <benchmark/benchmark.h>

#include "mfnuts/gp.hpp"
#include "mfnuts/random.hpp"

namespace {

using namespace mfnuts;

GpModel make_model(int n, int d) {
  RandomStream rng(17);
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X.row(i) = rng.normal_vector(d).transpose();
    y[i] = std::sin(X(i, 0)) - 0.5 * X.row(i).squaredNorm();
  }
  SquaredExponential k{1.0, Eigen::VectorXd::Ones(d)};
  return GpModel(X, y, k, 1e-6);
}

void BM_GpFactorize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RandomStream rng(3);
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X.row(i) = rng.normal_vector(4).transpose();
    y[i] = X.row(i).squaredNorm();
  }
  SquaredExponential k{1.0, Eigen::VectorXd::Ones(4)};
  for (auto _ : state) {
    GpModel m(X, y, k, 1e-6);
    benchmark::DoNotOptimize(m.alpha().data());
  }
}
BENCHMARK(BM_GpFactorize)->Arg(100)->Arg(250)->Arg(500);

void BM_GpPredictMeanGrad(benchmark::State& state) {
  GpModel m = make_model(static_cast<int>(state.range(0)), 8);
  RandomStream rng(5);
  Eigen::VectorXd x = rng.normal_vector(8);
  double mean;
  Eigen::VectorXd grad;
  for (auto _ : state) {
    m.predict_mean_and_grad(x, mean, grad);
    benchmark::DoNotOptimize(mean);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_GpPredictMeanGrad)->Arg(100)->Arg(500);

}  // namespace
