#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mfnuts/kernel.hpp"

namespace mfnuts {

struct SingularKernelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// filled by gp_fit when requested
struct GpFitInfo {
  std::vector<double> start_lml;  // log marginal likelihood at each initial point
  double final_lml = 0.0;
};

struct GpFitOptions {
  int n_starts = 8;
  // 0 selects a budget from the number of hyperparameters
  int max_iterations = 0;
  bool train_noise = true;
  double noise_floor = 1e-10;
  std::uint64_t seed = 0;
  // extra initial log-hyperparameter vectors (noise appended when trained)
  std::vector<Eigen::VectorXd> warm_starts;
  GpFitInfo* info = nullptr;
};

// Exact GP with zero prior mean on targets centered by their sample mean.
// Immutable after construction apart from append_point, which refactorizes
// with the same hyperparameters.
class GpModel {
 public:
  GpModel() = default;
  // Builds K + (noise + jitter) I and its Cholesky factor. Jitter starts at
  // 1e-10 * trace(K)/n and escalates tenfold up to 1e-4 * trace(K)/n before
  // SingularKernelError is thrown.
  GpModel(Eigen::MatrixXd inputs, Eigen::VectorXd targets, Kernel kernel, double noise_variance);

  GpPrediction predict(const Eigen::VectorXd& x) const;
  double predict_mean(const Eigen::VectorXd& x) const;
  // gradient of the posterior mean
  Eigen::VectorXd predict_mean_grad(const Eigen::VectorXd& x) const;
  // both in one pass over the training set
  void predict_mean_and_grad(const Eigen::VectorXd& x, double& mean, Eigen::VectorXd& grad) const;

  // -1/2 y'alpha - sum log diag(L) - n/2 log(2 pi), y centered
  double log_marginal_likelihood() const;

  void append_point(const Eigen::VectorXd& x, double y);

  Eigen::Index size() const { return targets_.size(); }
  Eigen::Index input_dim() const { return inputs_.cols(); }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const Kernel& kernel() const { return kernel_; }
  double noise_variance() const { return noise_variance_; }
  double target_mean() const { return target_mean_; }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

 private:
  void factorize();

  Eigen::MatrixXd inputs_;   // n x p
  Eigen::VectorXd targets_;  // raw targets
  Kernel kernel_;
  double noise_variance_ = 0.0;
  double target_mean_ = 0.0;
  double jitter_ = 0.0;
  Eigen::MatrixXd chol_;   // lower triangular L, L L' = K + (noise + jitter) I
  Eigen::VectorXd alpha_;  // (K + (noise + jitter) I)^{-1} (y - mean)
};

// Hyperparameter training: multi-start Nelder-Mead maximization of the log
// marginal likelihood in log-hyperparameter space. `noise_variance` seeds the
// noise level; it is trained jointly unless options.train_noise is false.
GpModel gp_fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
               const Kernel& kernel_shape, double noise_variance, const GpFitOptions& options = {});

nlohmann::json gp_to_json(const GpModel& model);
GpModel gp_from_json(const nlohmann::json& j);

}  // namespace mfnuts
