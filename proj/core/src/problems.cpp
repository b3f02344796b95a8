#include "mfnuts/problems.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "mfnuts/pde.hpp"
#include "mfnuts/random.hpp"

namespace mfnuts {

double rosenbrock_loglike(const Eigen::VectorXd& theta, FidelityLevel level) {
  const double t1 = theta[0], t2 = theta[1];
  if (level == FidelityLevel::low) {
    const double a = t2 - t1 * t1 - 1.0;
    return -12.0 * a * a - (t1 - 1.0) * (t1 - 1.0);
  }
  const double a = t2 - t1 * t1;
  return -50.0 * a * a - (t1 - 1.0) * (t1 - 1.0);
}

Eigen::VectorXd rosenbrock_grad(const Eigen::VectorXd& theta, FidelityLevel level) {
  const double t1 = theta[0], t2 = theta[1];
  Eigen::VectorXd g(2);
  if (level == FidelityLevel::low) {
    const double a = t2 - t1 * t1 - 1.0;
    g[0] = 48.0 * a * t1 - 2.0 * (t1 - 1.0);
    g[1] = -24.0 * a;
  } else {
    const double a = t2 - t1 * t1;
    g[0] = 200.0 * a * t1 - 2.0 * (t1 - 1.0);
    g[1] = -100.0 * a;
  }
  return g;
}

const Eigen::MatrixXd& gaussian8d_covariance() {
  static const Eigen::MatrixXd sigma = [] {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(8, 8);
    for (int i = 0; i + 1 < 8; ++i) {
      s(i, i + 1) = 0.5;
      s(i + 1, i) = 0.5;
    }
    return s;
  }();
  return sigma;
}

namespace {

const Eigen::MatrixXd& gaussian8d_precision() {
  static const Eigen::MatrixXd prec =
      gaussian8d_covariance().llt().solve(Eigen::MatrixXd::Identity(8, 8));
  return prec;
}

}  // namespace

double gaussian8d_loglike(const Eigen::VectorXd& theta, FidelityLevel level) {
  if (level == FidelityLevel::low) return -0.5 * theta.squaredNorm();
  return -0.5 * theta.dot(gaussian8d_precision() * theta);
}

Eigen::VectorXd gaussian8d_grad(const Eigen::VectorXd& theta, FidelityLevel level) {
  if (level == FidelityLevel::low) return -theta;
  return -(gaussian8d_precision() * theta);
}

Eigen::VectorXd groundwater_true_intensities() {
  Eigen::VectorXd t(4);
  t << 0.75, 1.25, 0.8, 1.2;
  return t;
}

std::vector<Eigen::Vector2d> groundwater_source_locations() {
  return {{0.33, 0.33}, {0.33, 0.67}, {0.67, 0.33}, {0.67, 0.67}};
}

std::vector<Eigen::Vector2d> groundwater_probe_locations() {
  std::vector<Eigen::Vector2d> probes;
  for (double x : {0.25, 0.5, 0.75})
    for (double y : {0.25, 0.5, 0.75}) probes.push_back({x, y});
  return probes;
}

Eigen::VectorXd groundwater_forward(const Eigen::VectorXd& theta, FidelityLevel level) {
  const int n = level == FidelityLevel::low ? kGroundwaterMeshLow : kGroundwaterMeshHigh;
  const auto locations = groundwater_source_locations();
  pde::SourceSpec spec;
  spec.intensities = theta;
  spec.locations.resize(4, 2);
  for (int i = 0; i < 4; ++i) spec.locations.row(i) = locations[static_cast<std::size_t>(i)];
  spec.variances = Eigen::VectorXd::Constant(4, kGroundwaterSourceVariance);
  pde::Field u = pde::solve_poisson(1.0, pde::source_field(spec, n));
  return pde::probe(u, groundwater_probe_locations());
}

Eigen::VectorXd apply_observation_noise(const Eigen::VectorXd& clean, std::uint64_t seed) {
  RandomStream rng(seed);
  return clean + std::sqrt(kGroundwaterNoiseVariance) * rng.normal_vector(clean.size());
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> generate_observations(std::uint64_t seed) {
  Eigen::VectorXd clean = groundwater_forward(groundwater_true_intensities(), FidelityLevel::high);
  Eigen::VectorXd y = apply_observation_noise(clean, seed);
  Eigen::MatrixXd gamma =
      kGroundwaterNoiseVariance * Eigen::MatrixXd::Identity(clean.size(), clean.size());
  return {y, gamma};
}

double groundwater_logposterior(const Eigen::VectorXd& theta, FidelityLevel level,
                                const Eigen::VectorXd& y) {
  Eigen::VectorXd residual = y - groundwater_forward(theta, level);
  double loglike = -0.5 / kGroundwaterNoiseVariance * residual.squaredNorm();
  double logprior = -0.5 * (theta.array() - 1.0).square().sum();
  return loglike + logprior;
}

ProblemSpec make_rosenbrock() {
  ProblemSpec p;
  p.name = "rosenbrock";
  p.dimension = 2;
  p.stack.lower = Eigen::Vector2d(-2.0, -1.0);
  p.stack.upper = Eigen::Vector2d(2.0, 4.0);
  for (auto level : {FidelityLevel::low, FidelityLevel::high}) {
    Fidelity f;
    f.logpdf = [level](const Eigen::VectorXd& t) { return rosenbrock_loglike(t, level); };
    f.gradient = [level](const Eigen::VectorXd& t) { return rosenbrock_grad(t, level); };
    p.stack.fidelities.push_back(std::move(f));
  }
  return p;
}

ProblemSpec make_gaussian8d() {
  ProblemSpec p;
  p.name = "gaussian8d";
  p.dimension = 8;
  p.stack.lower = Eigen::VectorXd::Constant(8, -4.0);
  p.stack.upper = Eigen::VectorXd::Constant(8, 4.0);
  for (auto level : {FidelityLevel::low, FidelityLevel::high}) {
    Fidelity f;
    f.logpdf = [level](const Eigen::VectorXd& t) { return gaussian8d_loglike(t, level); };
    f.gradient = [level](const Eigen::VectorXd& t) { return gaussian8d_grad(t, level); };
    p.stack.fidelities.push_back(std::move(f));
  }
  p.true_parameters = Eigen::VectorXd::Zero(8);
  return p;
}

ProblemSpec make_groundwater(std::uint64_t data_seed) {
  ProblemSpec p;
  p.name = "groundwater";
  p.dimension = 4;
  p.stack.lower = Eigen::VectorXd::Constant(4, 0.0);
  p.stack.upper = Eigen::VectorXd::Constant(4, 2.0);
  auto [y, gamma] = generate_observations(data_seed);
  p.observations = y;
  p.noise_covariance = gamma;
  p.true_parameters = groundwater_true_intensities();
  for (auto level : {FidelityLevel::low, FidelityLevel::high}) {
    Fidelity f;
    f.logpdf = [level, y = p.observations](const Eigen::VectorXd& t) {
      return groundwater_logposterior(t, level, y);
    };
    // no analytic gradient: the forward model is a PDE solve
    p.stack.fidelities.push_back(std::move(f));
  }
  return p;
}

ProblemSpec make_problem(const std::string& name) {
  if (name == "rosenbrock") return make_rosenbrock();
  if (name == "gaussian8d") return make_gaussian8d();
  if (name == "groundwater") return make_groundwater();
  throw std::invalid_argument("unknown problem '" + name + "'");
}

}  // namespace mfnuts
