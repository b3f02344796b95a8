#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "mfnuts/diagnostics.hpp"
#include "mfnuts/random.hpp"

using namespace mfnuts;

namespace {

Eigen::MatrixXd iid_normal(Eigen::Index m, Eigen::Index d, std::uint64_t seed) {
  RandomStream rng(seed);
  Eigen::MatrixXd s(m, d);
  for (Eigen::Index i = 0; i < m; ++i) s.row(i) = rng.normal_vector(d).transpose();
  return s;
}

ChainRecord synthetic_record(const Eigen::MatrixXd& samples, long long offline, long long adapt) {
  ChainRecord rec;
  rec.samples = samples;
  rec.logp = Eigen::VectorXd::Zero(samples.rows());
  rec.accepted.assign(static_cast<std::size_t>(samples.rows()), 1);
  rec.hf_evals_cumulative.resize(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    rec.hf_evals_cumulative[static_cast<std::size_t>(i)] = i + 1;
  rec.offline_hf_evals = offline;
  rec.adapt_hf_evals = adapt;
  return rec;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("iid draws give an effective size close to the sample count") {
  Eigen::MatrixXd s = iid_normal(10000, 2, 9);
  const double v = mess(s);
  CHECK(v / 10000.0 > 0.9);
  CHECK(v / 10000.0 < 1.1);
}

TEST_CASE("ar(1) chain matches the analytic autocorrelation discount") {
  // x_t = 0.5 x_{t-1} + e_t has mess/M -> (1-rho)/(1+rho) = 1/3
  RandomStream rng(22);
  const int m = 100000;
  Eigen::MatrixXd s(m, 1);
  double x = 0.0;
  for (int i = 0; i < m; ++i) {
    x = 0.5 * x + rng.normal();
    s(i, 0) = x;
  }
  const double ratio = mess(s) / m;
  CHECK(ratio > 0.28);
  CHECK(ratio < 0.39);
}

TEST_CASE("a repeated single point is flagged degenerate without crashing") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(400, 2, 1.5);
  bool degenerate = false;
  const double v = mess(s, &degenerate);
  CHECK(degenerate);
  CHECK(std::isfinite(v));
}

TEST_CASE("short chains are rejected") {
  Eigen::MatrixXd s = iid_normal(10, 1, 3);
  CHECK_THROWS_AS(mess(s), std::invalid_argument);
}

TEST_CASE("mess is capped at twice the sample count") {
  // strongly antithetic samples push the batch-means denominator toward zero
  Eigen::MatrixXd s(2000, 1);
  RandomStream rng(4);
  double prev = 0.0;
  for (int i = 0; i < 2000; ++i) {
    double z = rng.normal();
    s(i, 0) = (i % 2 == 0) ? z : -z + 0.01 * prev;
    prev = z;
  }
  CHECK(mess(s) <= 2.0 * 2000.0);
}

TEST_CASE("mess is invariant under invertible affine maps") {
  Eigen::MatrixXd s = iid_normal(8000, 3, 31);
  Eigen::MatrixXd a(3, 3);
  a << 2.0, 0.3, 0.0, -0.5, 1.0, 0.2, 0.1, 0.0, 0.7;
  Eigen::RowVector3d b(4.0, -1.0, 0.5);
  Eigen::MatrixXd mapped = (s * a.transpose()).rowwise() + b;
  const double v0 = mess(s);
  const double v1 = mess(mapped);
  CHECK(std::abs(v1 - v0) / v0 <= 0.02);
}

TEST_CASE("curve accounting starts at the offline cost and ends at the full-chain value") {
  ChainRecord rec = synthetic_record(iid_normal(4000, 2, 41), 250, 17);
  auto curve = mess_curve(rec, 10);
  REQUIRE(!curve.empty());
  CHECK(curve.front().first >= 250);
  CHECK(curve.back().first == 250 + 17 + 4000);
  CHECK(curve.back().second == doctest::Approx(mess(rec.samples)).epsilon(1e-12));
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].first > curve[i - 1].first);
  // deterministic
  auto again = mess_curve(rec, 10);
  REQUIRE(again.size() == curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(again[i].first == curve[i].first);
    CHECK(again[i].second == curve[i].second);
  }
}

TEST_CASE("mess_at_cost respects the budget boundary") {
  ChainRecord rec = synthetic_record(iid_normal(4000, 2, 43), 100, 0);
  CHECK(mess_at_cost(rec, 99) == 0.0);
  const double v = mess_at_cost(rec, 100 + 2000);
  CHECK(v > 0.0);
  CHECK(v == doctest::Approx(mess(rec.samples.topRows(2000))).epsilon(1e-12));
}

TEST_CASE("summary bundles moments, acceptance, and curve") {
  ChainRecord rec = synthetic_record(iid_normal(4000, 2, 47), 10, 5);
  MetricsReport rep = summary(rec);
  CHECK(rep.acceptance_rate == 1.0);
  CHECK(rep.mean.cwiseAbs().maxCoeff() < 0.1);
  CHECK(std::abs(rep.covariance(0, 0) - 1.0) < 0.1);
  CHECK(rep.hf_evals_total == 10 + 5 + 4000);
  CHECK(!rep.curve.empty());
  // covariance comes out symmetric
  CHECK((rep.covariance - rep.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-10);

  // a constant chain has zero acceptance (after the first sample) and zero covariance
  ChainRecord flat = synthetic_record(Eigen::MatrixXd::Constant(100, 2, 3.0), 0, 0);
  std::fill(flat.accepted.begin(), flat.accepted.end(), 0);
  MetricsReport frep = summary(flat);
  CHECK(frep.acceptance_rate == 0.0);
  CHECK(frep.covariance.cwiseAbs().maxCoeff() == 0.0);
  CHECK(frep.mess_degenerate);
}

}  // TEST_SUITE
