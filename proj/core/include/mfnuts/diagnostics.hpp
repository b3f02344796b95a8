#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "mfnuts/samplers.hpp"

namespace mfnuts {

struct EstimatorDegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MetricsReport {
  double mess = 0.0;
  double acceptance_rate = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  long long hf_evals_total = 0;
  std::vector<std::pair<long long, double>> curve;  // (hf_evals, mess)
  bool mess_degenerate = false;
};

// Multivariate effective sample size M (det Lambda / det Sigma)^{1/d} with
// Lambda the sample covariance and Sigma the batch-means estimator of the
// asymptotic covariance (batch size floor(sqrt(M))). Singular covariances get
// a 1e-12 I jitter and set *degenerate; a Sigma still singular after jitter
// throws EstimatorDegenerateError. The result is capped at 2M.
double mess(const Eigen::MatrixXd& samples, bool* degenerate = nullptr);

// the shortest prefix length mess() accepts
bool mess_prefix_ok(Eigen::Index m);

// mESS on growing prefixes of the record; the x coordinate charges offline
// and adaptation costs plus the cumulative sampling cost at the prefix end.
// Prefixes too short for batch means are skipped.
std::vector<std::pair<long long, double>> mess_curve(const ChainRecord& record, int n_points);

// mESS of the longest prefix whose total cost is <= budget; 0 when no prefix
// qualifies.
double mess_at_cost(const ChainRecord& record, long long budget);

MetricsReport summary(const ChainRecord& record, int curve_points = 20);

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace mfnuts
