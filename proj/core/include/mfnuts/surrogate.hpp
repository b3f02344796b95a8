#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mfnuts/dynamics.hpp"
#include "mfnuts/gp.hpp"
#include "mfnuts/problems.hpp"
#include "mfnuts/random.hpp"

namespace mfnuts {

enum class SurrogateVariant { nargp, gpdf };

std::string to_string(SurrogateVariant v);
SurrogateVariant surrogate_variant_from_string(const std::string& s);

// Two-level fusion surrogate of a log density. The high GP acts on fused
// features built from the low GP's posterior mean:
//   NARGP: [mu_low(theta), theta]
//   GPDF:  [mu_low(theta), mu_low(theta + tau_i e_i)..., mu_low(theta - tau_i e_i)..., theta]
// Immutable after build; safe to share read-only across chains.
struct MfSurrogate {
  SurrogateVariant variant = SurrogateVariant::nargp;
  GpModel low_gp;             // theta -> f_low
  GpModel high_gp;            // features(theta) -> f_high
  Eigen::MatrixXd high_theta; // raw parameter rows of the high-fidelity design
  Eigen::VectorXd lag;        // per-dimension tau; empty for NARGP
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double validation_mse = std::numeric_limits<double>::infinity();
  bool mse_threshold_reached = false;
  bool degenerate_targets = false;
  long long offline_low_evals = 0;
  long long offline_high_evals = 0;  // training points plus test-set targets

  Eigen::Index dimension() const { return lower.size(); }
  Eigen::Index feature_dim() const;
  bool in_bounds(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd features(const Eigen::VectorXd& theta) const;
  double logpdf(const Eigen::VectorXd& theta) const;
  // chain-rule gradient through the feature map
  Eigen::VectorXd grad(const Eigen::VectorXd& theta) const;
  std::pair<double, Eigen::VectorXd> logpdf_and_grad(const Eigen::VectorXd& theta) const;
  // high-GP posterior variance composed through the stack
  double variance(const Eigen::VectorXd& theta) const;

  GradTarget as_target() const;
};

struct SurrogateBuildOptions {
  int n_low = 0;
  int n_high = 0;
  int n_test = 200;
  double mse_threshold = 1e-3;
  std::uint64_t seed = 0;
  bool train_nargp = true;
  bool train_gpdf = true;
  // GPDF lag as a fraction of the per-dimension box width
  double lag_fraction = 0.01;
  // Noise floor relative to the target variance of each fit. Keeps the
  // trained models away from the pure-interpolation regime, whose
  // near-singular solves make evaluations noisy.
  double relative_noise_floor = 1e-6;
  // hyperparameter-training budgets: full multistart for the first and final
  // fits, warm-started refits every refit_every acquisitions, plain
  // refactorization in between
  int fit_starts = 8;
  int refit_starts = 2;
  int refit_max_iterations = 0;  // 0: derived from dimension
  int refit_every = 5;
  int low_fit_max_iterations = 300;
  int acquisition_starts = 32;
};

struct SurrogateBuildReport {
  double nargp_mse = std::numeric_limits<double>::quiet_NaN();
  double gpdf_mse = std::numeric_limits<double>::quiet_NaN();
  int high_design_size = 0;
  int points_added = 0;
  long long low_evals = 0;
  long long high_evals = 0;
};

// Trains the requested candidates from nested Latin-hypercube designs, adds
// high-fidelity points at the highest-variance location until the validation
// MSE on fresh uniform test points reaches the threshold or the high budget
// is exhausted, and returns the candidate with the smaller validation MSE.
// The high-fidelity dataset (initial subset plus acquisitions) is shared by
// both candidates, so the total number of high-fidelity training evaluations
// is at most n_high.
MfSurrogate build_mfgp(const FidelityStack& stack, const SurrogateBuildOptions& options,
                       SurrogateBuildReport* report = nullptr);

// argmax of the composed posterior variance over the box, located by
// multi-start local search from Latin-hypercube seeds
Eigen::VectorXd acquire_next_point(const MfSurrogate& surrogate, const Eigen::VectorXd& lower,
                                   const Eigen::VectorXd& upper, RandomStream& rng,
                                   int n_starts = 32);

nlohmann::json surrogate_to_json(const MfSurrogate& surrogate);
MfSurrogate surrogate_from_json(const nlohmann::json& j);
void save_surrogate(const MfSurrogate& surrogate, const std::string& path);
MfSurrogate load_surrogate(const std::string& path);

}  // namespace mfnuts
