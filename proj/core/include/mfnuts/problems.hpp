#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mfnuts {

enum class FidelityLevel { low, high };

// One member of a model hierarchy. Every log-density evaluation (with or
// without gradient) ticks the shared call counter exactly once.
struct Fidelity {
  std::function<double(const Eigen::VectorXd&)> logpdf;
  // empty when no analytic gradient is available
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::shared_ptr<std::atomic<long long>> calls = std::make_shared<std::atomic<long long>>(0);

  double operator()(const Eigen::VectorXd& theta) const {
    calls->fetch_add(1, std::memory_order_relaxed);
    return logpdf(theta);
  }
  std::pair<double, Eigen::VectorXd> eval_with_grad(const Eigen::VectorXd& theta) const {
    calls->fetch_add(1, std::memory_order_relaxed);
    return {logpdf(theta), gradient(theta)};
  }
  bool has_gradient() const { return static_cast<bool>(gradient); }
  long long call_count() const { return calls->load(); }
};

// Log-density functions in increasing order of fidelity, sharing one
// parameter box.
struct FidelityStack {
  std::vector<Fidelity> fidelities;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  const Fidelity& low() const { return fidelities.front(); }
  const Fidelity& high() const { return fidelities.back(); }
  Eigen::Index dimension() const { return lower.size(); }
};

struct ProblemSpec {
  std::string name;
  Eigen::Index dimension = 0;
  FidelityStack stack;
  Eigen::VectorXd true_parameters;   // empty when not applicable
  Eigen::VectorXd observations;      // empty when not applicable
  Eigen::MatrixXd noise_covariance;  // empty when not applicable
};

// L1 = -12 (t2 - t1^2 - 1)^2 - (t1 - 1)^2
// L2 = -50 (t2 - t1^2)^2     - (t1 - 1)^2
double rosenbrock_loglike(const Eigen::VectorXd& theta, FidelityLevel level);
Eigen::VectorXd rosenbrock_grad(const Eigen::VectorXd& theta, FidelityLevel level);

// low: -1/2 |theta|^2; high: -1/2 theta' Sigma^{-1} theta with Sigma
// tridiagonal (1 on the diagonal, 0.5 off). Both unnormalized.
double gaussian8d_loglike(const Eigen::VectorXd& theta, FidelityLevel level);
Eigen::VectorXd gaussian8d_grad(const Eigen::VectorXd& theta, FidelityLevel level);
const Eigen::MatrixXd& gaussian8d_covariance();

// Groundwater inverse problem constants.
inline constexpr double kGroundwaterNoiseVariance = 0.005;
inline constexpr double kGroundwaterSourceVariance = 0.01;
inline constexpr int kGroundwaterMeshLow = 8;
inline constexpr int kGroundwaterMeshHigh = 64;
inline constexpr std::uint64_t kGroundwaterDataSeed = 192;

Eigen::VectorXd groundwater_true_intensities();
std::vector<Eigen::Vector2d> groundwater_source_locations();
std::vector<Eigen::Vector2d> groundwater_probe_locations();

// Forward map: probe values of the solved flow field for the given source
// intensities at the fidelity's mesh resolution.
Eigen::VectorXd groundwater_forward(const Eigen::VectorXd& theta, FidelityLevel level);

// clean + sqrt(0.005) * z with z seeded iid standard normal
Eigen::VectorXd apply_observation_noise(const Eigen::VectorXd& clean, std::uint64_t seed);

// Solves the high-fidelity forward problem at the true intensities and adds
// iid N(0, 0.005) noise per probe. Returns (y, Gamma = 0.005 I).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> generate_observations(std::uint64_t seed);

// -1/(2*0.005) |y - F(theta)|^2 - 1/2 |theta - 1|^2
double groundwater_logposterior(const Eigen::VectorXd& theta, FidelityLevel level,
                                const Eigen::VectorXd& y);

ProblemSpec make_rosenbrock();
ProblemSpec make_gaussian8d();
ProblemSpec make_groundwater(std::uint64_t data_seed = kGroundwaterDataSeed);

// by config name: "rosenbrock", "gaussian8d", "groundwater"
ProblemSpec make_problem(const std::string& name);

}  // namespace mfnuts
