#include "mfnuts/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace mfnuts {

double hamiltonian(double logp, const Eigen::VectorXd& r) { return -logp + 0.5 * r.squaredNorm(); }

double hamiltonian(const PhaseState& state) { return hamiltonian(state.logp, state.r); }

bool phase_finite(const PhaseState& state) {
  return std::isfinite(state.logp) && state.theta.allFinite() && state.r.allFinite() &&
         state.grad.allFinite();
}

PhaseState leapfrog(const PhaseState& state, double eps, const GradTarget& target) {
  PhaseState next;
  Eigen::VectorXd r_half = state.r + 0.5 * eps * state.grad;
  next.theta = state.theta + eps * r_half;
  auto [logp, grad] = target(next.theta);
  next.logp = logp;
  next.grad = std::move(grad);
  next.r = r_half + 0.5 * eps * next.grad;
  return next;
}

double find_reasonable_epsilon(const Eigen::VectorXd& theta0, const Eigen::VectorXd& r0,
                               const GradTarget& target) {
  auto [logp0, grad0] = target(theta0);
  PhaseState start{theta0, r0, logp0, grad0};
  const double h0 = hamiltonian(start);
  for (double eps = 1.0; eps >= 1e-10; eps *= 0.5) {
    PhaseState next = leapfrog(start, eps, target);
    if (phase_finite(next) && std::exp(h0 - hamiltonian(next)) > 0.5) return eps;
  }
  throw std::runtime_error(
      "find_reasonable_epsilon: step size underflow (degenerate target geometry)");
}

double find_reasonable_epsilon(const Eigen::VectorXd& theta0, const GradTarget& target,
                               RandomStream& rng) {
  return find_reasonable_epsilon(theta0, rng.normal_vector(theta0.size()), target);
}

DualAveragingState DualAveragingState::init(double eps0, double delta) {
  DualAveragingState s;
  s.log_eps = std::log(eps0);
  s.mu = std::log(10.0 * eps0);
  s.delta = delta;
  return s;
}

double DualAveragingState::current_step() const { return std::exp(log_eps); }

double DualAveragingState::adapted_step() const { return std::exp(log_eps_bar); }

DualAveragingState dual_averaging_update(const DualAveragingState& state, double alpha_stat) {
  DualAveragingState s = state;
  const double m = static_cast<double>(state.iteration + 1);
  const double w = 1.0 / (m + s.t0);
  s.h_bar = (1.0 - w) * state.h_bar + w * (s.delta - alpha_stat);
  s.log_eps = s.mu - std::sqrt(m) / s.gamma * s.h_bar;
  const double eta = std::pow(m, -s.kappa);
  s.log_eps_bar = eta * s.log_eps + (1.0 - eta) * state.log_eps_bar;
  s.iteration = state.iteration + 1;
  return s;
}

}  // namespace mfnuts
