#pragma once

#include <functional>

#include <Eigen/Core>

namespace mfnuts {

struct NelderMeadOptions {
  int max_iterations = 400;
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-10;
  // relative size of the initial simplex edges (absolute fallback for
  // coordinates near zero)
  double initial_step = 0.25;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization. When `lower`/`upper` are non-empty
// every evaluated vertex is clamped into the box, so `f` is never called
// outside it. Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& options = {},
                             const Eigen::VectorXd& lower = Eigen::VectorXd(),
                             const Eigen::VectorXd& upper = Eigen::VectorXd());

}  // namespace mfnuts
