#pragma once

#include <functional>
#include <utility>

#include <Eigen/Core>

#include "mfnuts/random.hpp"

namespace mfnuts {

// log density with gradient, evaluated jointly
using GradTarget = std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;

// Position/momentum pair with the log density and gradient cached at theta.
struct PhaseState {
  Eigen::VectorXd theta;
  Eigen::VectorXd r;
  double logp = 0.0;
  Eigen::VectorXd grad;
};

// H(theta, r) = -logp + 1/2 r.r
double hamiltonian(double logp, const Eigen::VectorXd& r);
double hamiltonian(const PhaseState& state);

bool phase_finite(const PhaseState& state);

// One half-kick / drift / half-kick step. The returned state carries a fresh
// logp/grad at the new position; non-finite values signal a diverged
// trajectory and are treated as rejection by callers. eps may be negative
// (backward integration).
PhaseState leapfrog(const PhaseState& state, double eps, const GradTarget& target);

// Starting from eps = 1, halves eps until one leapfrog step keeps the
// acceptance probability exp(H0 - H') above 0.5. Throws std::runtime_error if
// eps underflows below 1e-10.
double find_reasonable_epsilon(const Eigen::VectorXd& theta0, const Eigen::VectorXd& r0,
                               const GradTarget& target);
double find_reasonable_epsilon(const Eigen::VectorXd& theta0, const GradTarget& target,
                               RandomStream& rng);

// Step-size adaptation toward a target acceptance statistic delta.
struct DualAveragingState {
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double mu = 0.0;
  long long iteration = 0;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double delta = 0.65;

  static DualAveragingState init(double eps0, double delta = 0.65);

  double current_step() const;
  // the frozen step size once adaptation ends
  double adapted_step() const;
};

DualAveragingState dual_averaging_update(const DualAveragingState& state, double alpha_stat);

// H growth beyond this over the trajectory start marks a divergence
inline constexpr double kDivergenceThreshold = 1000.0;

}  // namespace mfnuts
