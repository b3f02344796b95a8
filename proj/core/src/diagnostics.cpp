#include "mfnuts/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

namespace mfnuts {

namespace {

// log det via Cholesky; adds 1e-12 I once if needed
double chol_logdet(Eigen::MatrixXd m, bool* jittered) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      return 2.0 * L.diagonal().array().log().sum();
    }
    m.diagonal().array() += 1e-12;
    if (jittered) *jittered = true;
  }
  throw EstimatorDegenerateError("mess: covariance not positive definite after jitter");
}

}  // namespace

bool mess_prefix_ok(Eigen::Index m) {
  const auto b = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(m))));
  return m >= 4 * b && b >= 1 && m / b >= 2;
}

double mess(const Eigen::MatrixXd& samples, bool* degenerate) {
  const Eigen::Index m = samples.rows(), d = samples.cols();
  if (d < 1) throw std::invalid_argument("mess: need at least one dimension");
  if (!mess_prefix_ok(m)) throw std::invalid_argument("mess: chain too short for batch means");
  if (degenerate) *degenerate = false;

  Eigen::RowVectorXd mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd lambda = centered.transpose() * centered / static_cast<double>(m - 1);

  const auto b = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(m))));
  const Eigen::Index a = m / b;
  Eigen::MatrixXd batch_means(a, d);
  for (Eigen::Index k = 0; k < a; ++k)
    batch_means.row(k) = samples.middleRows(k * b, b).colwise().mean();
  Eigen::RowVectorXd grand = batch_means.colwise().mean();
  Eigen::MatrixXd bc = batch_means.rowwise() - grand;
  Eigen::MatrixXd sigma =
      static_cast<double>(b) / static_cast<double>(a - 1) * (bc.transpose() * bc);

  bool jittered = false;
  const double logdet_lambda = chol_logdet(std::move(lambda), &jittered);
  const double logdet_sigma = chol_logdet(std::move(sigma), &jittered);
  if (degenerate) *degenerate = jittered;

  const double value =
      static_cast<double>(m) * std::exp((logdet_lambda - logdet_sigma) / static_cast<double>(d));
  return std::min(value, 2.0 * static_cast<double>(m));
}

std::vector<std::pair<long long, double>> mess_curve(const ChainRecord& record, int n_points) {
  if (n_points < 2) throw std::invalid_argument("mess_curve: need at least two points");
  const Eigen::Index m = record.size();
  const long long offset = record.offline_hf_evals + record.adapt_hf_evals;
  std::vector<std::pair<long long, double>> curve;
  for (int k = 1; k <= n_points; ++k) {
    const auto len = static_cast<Eigen::Index>(static_cast<double>(m) * k / n_points);
    if (!mess_prefix_ok(len)) continue;
    double value;
    try {
      value = mess(record.samples.topRows(len), nullptr);
    } catch (const EstimatorDegenerateError&) {
      continue;
    }
    curve.emplace_back(offset + record.hf_evals_cumulative[static_cast<std::size_t>(len - 1)], value);
  }
  return curve;
}

double mess_at_cost(const ChainRecord& record, long long budget) {
  const long long offset = record.offline_hf_evals + record.adapt_hf_evals;
  if (budget < offset) return 0.0;
  // largest prefix with total cost within budget
  Eigen::Index len = 0;
  for (std::size_t i = 0; i < record.hf_evals_cumulative.size(); ++i) {
    if (offset + record.hf_evals_cumulative[i] <= budget)
      len = static_cast<Eigen::Index>(i) + 1;
    else
      break;
  }
  if (!mess_prefix_ok(len)) return 0.0;
  try {
    return mess(record.samples.topRows(len), nullptr);
  } catch (const EstimatorDegenerateError&) {
    return 0.0;
  }
}

MetricsReport summary(const ChainRecord& record, int curve_points) {
  const Eigen::Index m = record.size();
  if (m < 2) throw std::invalid_argument("summary: need at least two samples");
  MetricsReport rep;
  rep.mean = record.samples.colwise().mean();
  Eigen::MatrixXd centered = record.samples.rowwise() - rep.mean.transpose();
  rep.covariance = centered.transpose() * centered / static_cast<double>(m - 1);
  double acc = 0.0;
  for (auto flag : record.accepted) acc += flag;
  rep.acceptance_rate = acc / static_cast<double>(record.accepted.size());
  rep.hf_evals_total = record.offline_hf_evals + record.adapt_hf_evals +
                       (record.hf_evals_cumulative.empty() ? 0 : record.hf_evals_cumulative.back());
  try {
    rep.mess = mess(record.samples, &rep.mess_degenerate);
  } catch (const EstimatorDegenerateError&) {
    rep.mess = 0.0;
    rep.mess_degenerate = true;
  }
  rep.curve = mess_curve(record, curve_points);
  return rep;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mess"] = report.mess;
  j["acceptance_rate"] = report.acceptance_rate;
  j["mean"] = std::vector<double>(report.mean.begin(), report.mean.end());
  std::vector<std::vector<double>> cov(static_cast<std::size_t>(report.covariance.rows()));
  for (Eigen::Index i = 0; i < report.covariance.rows(); ++i)
    cov[static_cast<std::size_t>(i)].assign(report.covariance.row(i).begin(),
                                            report.covariance.row(i).end());
  j["covariance"] = cov;
  j["hf_evals_total"] = report.hf_evals_total;
  j["mess_degenerate"] = report.mess_degenerate;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [x, y] : report.curve) curve.push_back({{"hf_evals", x}, {"mess", y}});
  j["curve"] = curve;
  return j;
}

}  // namespace mfnuts
