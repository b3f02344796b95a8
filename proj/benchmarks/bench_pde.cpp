#include <benchmark/benchmark.h>

#include "mfnuts/pde.hpp"
#include "mfnuts/problems.hpp"

namespace {

using namespace mfnuts;

void BM_PoissonSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  pde::SourceSpec spec;
  spec.intensities = groundwater_true_intensities();
  auto locs = groundwater_source_locations();
  spec.locations.resize(4, 2);
  for (int i = 0; i < 4; ++i) spec.locations.row(i) = locs[static_cast<std::size_t>(i)];
  spec.variances = Eigen::VectorXd::Constant(4, kGroundwaterSourceVariance);
  pde::Field source = pde::source_field(spec, n);
  for (auto _ : state) {
    pde::Field u = pde::solve_poisson(1.0, source);
    benchmark::DoNotOptimize(u.values.data());
  }
}
BENCHMARK(BM_PoissonSolve)->Arg(8)->Arg(32)->Arg(64);

void BM_GroundwaterForward(benchmark::State& state) {
  Eigen::VectorXd theta = groundwater_true_intensities();
  const auto level = state.range(0) == 0 ? FidelityLevel::low : FidelityLevel::high;
  for (auto _ : state) {
    Eigen::VectorXd probes = groundwater_forward(theta, level);
    benchmark::DoNotOptimize(probes.data());
  }
}
BENCHMARK(BM_GroundwaterForward)->Arg(0)->Arg(1);

}  // namespace
