#include <benchmark/benchmark.h>

#include "mfnuts/samplers.hpp"

namespace {

using namespace mfnuts;

GradTarget normal_target() {
  return [](const Eigen::VectorXd& t) -> std::pair<double, Eigen::VectorXd> {
    return {-0.5 * t.squaredNorm(), -t};
  };
}

void BM_Leapfrog(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  auto target = normal_target();
  PhaseState s{Eigen::VectorXd::Ones(d), Eigen::VectorXd::Ones(d), -0.5 * d,
               -Eigen::VectorXd::Ones(d)};
  for (auto _ : state) {
    s = leapfrog(s, 0.01, target);
    benchmark::DoNotOptimize(s.theta.data());
  }
}
BENCHMARK(BM_Leapfrog)->Arg(2)->Arg(8);

void BM_NutsStep(benchmark::State& state) {
  const Eigen::Index d = state.range(0);
  auto target = normal_target();
  RandomStream rng(11);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  auto [logp, grad] = target(theta);
  for (auto _ : state) {
    NutsResult r = nuts_step(theta, logp, grad, 0.3, target, rng, 10);
    theta = r.theta;
    logp = r.logp;
    grad = r.grad;
    benchmark::DoNotOptimize(theta.data());
  }
}
BENCHMARK(BM_NutsStep)->Arg(2)->Arg(8);

void BM_MhStep(benchmark::State& state) {
  auto logpdf = [](const Eigen::VectorXd& t) { return -0.5 * t.squaredNorm(); };
  RandomStream rng(13);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(8);
  double logp = logpdf(theta);
  for (auto _ : state) {
    MhStepResult r = mh_step(theta, logp, logpdf, 0.85, rng);
    theta = r.theta;
    logp = r.logp;
    benchmark::DoNotOptimize(theta.data());
  }
}
BENCHMARK(BM_MhStep);

}  // namespace

BENCHMARK_MAIN();
