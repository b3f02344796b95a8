#include <cmath>
#include <cstdio>
#include <filesystem>

#include <Eigen/Dense>

#include "doctest.h"
#include "mfnuts/design.hpp"
#include "mfnuts/surrogate.hpp"
#include "test_helpers.hpp"

using namespace mfnuts;
using testhelpers::fd_gradient;
using testhelpers::gradients_agree;

namespace {

double quadratic_logpdf(const Eigen::VectorXd& t) { return -0.5 * t.squaredNorm(); }

FidelityStack quadratic_stack(Eigen::Index d, double box) {
  FidelityStack stack;
  stack.lower = Eigen::VectorXd::Constant(d, -box);
  stack.upper = Eigen::VectorXd::Constant(d, box);
  for (int k = 0; k < 2; ++k) {
    Fidelity f;
    f.logpdf = quadratic_logpdf;
    stack.fidelities.push_back(std::move(f));
  }
  return stack;
}

// a banana-shaped pair mild enough that interpolating GP fits stay
// well-conditioned (the finite-difference oracle needs low evaluation noise)
FidelityStack rosenbrock_like_stack() {
  FidelityStack stack;
  stack.lower = Eigen::Vector2d(-2.0, -1.0);
  stack.upper = Eigen::Vector2d(2.0, 3.0);
  Fidelity low;
  low.logpdf = [](const Eigen::VectorXd& t) {
    const double a = t[1] - t[0] * t[0] - 1.0;
    return -0.3 * a * a - 0.5 * (t[0] - 1.0) * (t[0] - 1.0);
  };
  Fidelity high;
  high.logpdf = [](const Eigen::VectorXd& t) {
    const double a = t[1] - t[0] * t[0];
    return -0.5 * a * a - 0.5 * (t[0] - 1.0) * (t[0] - 1.0);
  };
  stack.fidelities = {std::move(low), std::move(high)};
  return stack;
}

SurrogateBuildOptions small_build(int n_low, int n_high, std::uint64_t seed) {
  SurrogateBuildOptions o;
  o.n_low = n_low;
  o.n_high = n_high;
  o.n_test = 80;
  o.mse_threshold = 1e-3;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_SUITE("mf_surrogate") {

TEST_CASE("an identical low/high pair is learned to the mse threshold") {
  FidelityStack stack = quadratic_stack(2, 3.0);
  MfSurrogate s = build_mfgp(stack, small_build(60, 24, 11));
  CHECK(s.validation_mse <= 1e-3);
  CHECK(s.mse_threshold_reached);

  // oracle: direct high-fidelity evaluation on a fresh test set
  RandomStream rng(123);
  Eigen::MatrixXd fresh = uniform_box(150, stack.lower, stack.upper, rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < fresh.rows(); ++i) {
    const double diff = s.logpdf(fresh.row(i)) - quadratic_logpdf(fresh.row(i));
    acc += diff * diff;
  }
  CHECK(acc / fresh.rows() <= 5e-3);

  // the mode is matched closely
  CHECK(std::abs(s.logpdf(Eigen::VectorXd::Zero(2)) - 0.0) <= 0.05);
}

TEST_CASE("surrogate evaluation is deterministic to the bit") {
  FidelityStack stack = quadratic_stack(2, 3.0);
  MfSurrogate s = build_mfgp(stack, small_build(40, 16, 3));
  Eigen::Vector2d x(0.7, -1.1);
  CHECK(s.logpdf(x) == s.logpdf(x));
  Eigen::VectorXd g1 = s.grad(x), g2 = s.grad(x);
  CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity fusion returns the low model's mean") {
  // train the high GP on g(u, theta) = u data
  RandomStream rng(17);
  Eigen::MatrixXd low_x(25, 1);
  Eigen::VectorXd low_y(25);
  for (int i = 0; i < 25; ++i) {
    low_x(i, 0) = -2.0 + 4.0 * i / 24.0;
    low_y[i] = std::sin(low_x(i, 0));
  }
  GpModel low = gp_fit(low_x, low_y, SquaredExponential{1.0, Eigen::VectorXd::Ones(1)}, 1e-8);

  Eigen::MatrixXd high_theta(12, 1);
  Eigen::MatrixXd features(12, 2);
  Eigen::VectorXd high_y(12);
  for (int i = 0; i < 12; ++i) {
    high_theta(i, 0) = -2.0 + 4.0 * i / 11.0;
    const double u = low.predict_mean(high_theta.row(i));
    features(i, 0) = u;
    features.row(i).tail(1) = high_theta.row(i);
    high_y[i] = u;
  }
  NargpComposite shape;
  shape.k_f = {1.0, Eigen::VectorXd::Ones(1)};
  shape.k_rho = {1.0, Eigen::VectorXd::Ones(1)};
  shape.k_delta = {1.0, Eigen::VectorXd::Ones(1)};
  shape.split = 1;
  GpModel high = gp_fit(features, high_y, shape, 1e-8);

  MfSurrogate s;
  s.variant = SurrogateVariant::nargp;
  s.low_gp = low;
  s.high_gp = high;
  s.high_theta = high_theta;
  s.lower = Eigen::VectorXd::Constant(1, -2.0);
  s.upper = Eigen::VectorXd::Constant(1, 2.0);

  for (double x : {-1.7, -0.4, 0.0, 0.9, 1.8}) {
    Eigen::VectorXd t(1);
    t << x;
    CHECK(std::abs(s.logpdf(t) - low.predict_mean(t)) <= 0.05);
  }
}

TEST_CASE("chain-rule gradients match finite differences for both variants") {
  // strict check on the well-conditioned identical-pair stack
  FidelityStack exact = quadratic_stack(2, 3.0);
  for (const bool gpdf : {false, true}) {
    SurrogateBuildOptions o;
    o.n_low = 60;
    o.n_high = 24;
    o.n_test = 80;
    o.mse_threshold = 1e-3;
    o.seed = gpdf ? 51 : 52;
    o.train_nargp = !gpdf;
    o.train_gpdf = gpdf;
    MfSurrogate s = build_mfgp(exact, o);
    CHECK(s.variant == (gpdf ? SurrogateVariant::gpdf : SurrogateVariant::nargp));
    RandomStream rng(9);
    Eigen::MatrixXd pts = uniform_box(50, exact.lower, exact.upper, rng);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      Eigen::VectorXd x = pts.row(i);
      Eigen::VectorXd an = s.grad(x);
      Eigen::VectorXd fd = fd_gradient([&](const Eigen::VectorXd& q) { return s.logpdf(q); }, x);
      CHECK(gradients_agree(an, fd, 1e-4, 5e-6));
    }
    // evaluated jointly and separately agree
    auto [lp, g] = s.logpdf_and_grad(pts.row(3));
    CHECK(lp == s.logpdf(pts.row(3)));
    CHECK((g - s.grad(pts.row(3))).cwiseAbs().maxCoeff() == 0.0);
  }

  // banana-shaped stack: wider target range, hence a larger differencing
  // noise allowance
  FidelityStack stack = rosenbrock_like_stack();
  for (const bool gpdf : {false, true}) {
    SurrogateBuildOptions o = small_build(50, 20, gpdf ? 21 : 22);
    o.train_nargp = !gpdf;
    o.train_gpdf = gpdf;
    MfSurrogate s = build_mfgp(stack, o);
    RandomStream rng(9);
    Eigen::MatrixXd pts = uniform_box(50, stack.lower, stack.upper, rng);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      Eigen::VectorXd x = pts.row(i);
      Eigen::VectorXd an = s.grad(x);
      Eigen::VectorXd fd = fd_gradient([&](const Eigen::VectorXd& q) { return s.logpdf(q); }, x);
      CHECK(gradients_agree(an, fd, 1e-4, 2e-5));
    }
  }
}

TEST_CASE("gradient vanishes on a symmetric surrogate's axis") {
  Eigen::MatrixXd low_x(9, 1);
  Eigen::VectorXd low_y(9);
  for (int i = 0; i < 9; ++i) {
    low_x(i, 0) = -2.0 + 0.5 * i;
    low_y[i] = -0.5 * low_x(i, 0) * low_x(i, 0);
  }
  GpModel low(low_x, low_y, SquaredExponential{2.0, Eigen::VectorXd::Ones(1)}, 1e-10);
  Eigen::MatrixXd features(9, 2);
  for (int i = 0; i < 9; ++i) {
    features(i, 0) = low.predict_mean(low_x.row(i));
    features(i, 1) = low_x(i, 0);
  }
  NargpComposite shape;
  shape.k_f = {1.0, Eigen::VectorXd::Ones(1) * 2.0};
  shape.k_rho = {1.0, Eigen::VectorXd::Ones(1) * 2.0};
  shape.k_delta = {1.0, Eigen::VectorXd::Ones(1) * 2.0};
  shape.split = 1;
  MfSurrogate s;
  s.variant = SurrogateVariant::nargp;
  s.low_gp = low;
  s.high_gp = GpModel(features, low_y, shape, 1e-10);
  s.high_theta = low_x;
  s.lower = Eigen::VectorXd::Constant(1, -2.0);
  s.upper = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(std::abs(s.grad(Eigen::VectorXd::Zero(1))[0]) <= 1e-6);
}

TEST_CASE("constant targets give a vanishing gradient everywhere") {
  FidelityStack stack;
  stack.lower = Eigen::VectorXd::Constant(2, -1.0);
  stack.upper = Eigen::VectorXd::Constant(2, 1.0);
  for (int k = 0; k < 2; ++k) {
    Fidelity f;
    f.logpdf = [](const Eigen::VectorXd&) { return 4.2; };
    stack.fidelities.push_back(std::move(f));
  }
  MfSurrogate s = build_mfgp(stack, small_build(20, 8, 2));
  CHECK(s.degenerate_targets);
  RandomStream rng(5);
  Eigen::MatrixXd pts = uniform_box(10, stack.lower, stack.upper, rng);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    CHECK(s.grad(pts.row(i)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("acquisition lands where variance beats the training points") {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 0.3, -0.4;
  GpModel low(x, y, SquaredExponential{1.0, 0.4 * Eigen::VectorXd::Ones(1)}, 1e-10);
  Eigen::MatrixXd features(2, 2);
  for (int i = 0; i < 2; ++i) {
    features(i, 0) = low.predict_mean(x.row(i));
    features(i, 1) = x(i, 0);
  }
  NargpComposite shape;
  shape.k_f = {1.0, Eigen::VectorXd::Ones(1)};
  shape.k_rho = {1.0, 0.4 * Eigen::VectorXd::Ones(1)};
  shape.k_delta = {1.0, 0.4 * Eigen::VectorXd::Ones(1)};
  shape.split = 1;
  MfSurrogate s;
  s.variant = SurrogateVariant::nargp;
  s.low_gp = low;
  s.high_gp = GpModel(features, y, shape, 1e-10);
  s.high_theta = x;
  s.lower = Eigen::VectorXd::Constant(1, 0.0);
  s.upper = Eigen::VectorXd::Constant(1, 1.0);

  RandomStream rng(8);
  Eigen::VectorXd next = acquire_next_point(s, s.lower, s.upper, rng);
  CHECK(next[0] > 0.0);
  CHECK(next[0] < 1.0);
  CHECK(s.variance(next) >= s.variance(x.row(0)));
  CHECK(s.variance(next) >= s.variance(x.row(1)));

  // dense-grid oracle in one dimension
  double grid_best = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    Eigen::VectorXd t(1);
    t << i / 10000.0;
    grid_best = std::max(grid_best, s.variance(t));
  }
  CHECK(s.variance(next) >= grid_best - 1e-6);

  // collapsed bounds return the single feasible point
  Eigen::VectorXd point = Eigen::VectorXd::Constant(1, 0.37);
  RandomStream rng2(9);
  CHECK(acquire_next_point(s, point, point, rng2)[0] == 0.37);
}

TEST_CASE("high-fidelity training inputs stay nested inside the low design") {
  FidelityStack stack = rosenbrock_like_stack();
  MfSurrogate s = build_mfgp(stack, small_build(40, 18, 31));
  const Eigen::MatrixXd& low_inputs = s.low_gp.inputs();
  for (Eigen::Index i = 0; i < s.high_theta.rows(); ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < low_inputs.rows() && !found; ++j)
      found = (low_inputs.row(j) - s.high_theta.row(i)).cwiseAbs().maxCoeff() == 0.0;
    CHECK(found);
  }
}

TEST_CASE("instrumented stubs confirm the evaluation ledger") {
  long long low_calls = 0, high_calls = 0;
  FidelityStack stack;
  stack.lower = Eigen::VectorXd::Constant(2, -1.0);
  stack.upper = Eigen::VectorXd::Constant(2, 1.0);
  Fidelity low;
  low.logpdf = [&low_calls](const Eigen::VectorXd& t) {
    ++low_calls;
    return -t.squaredNorm();
  };
  Fidelity high;
  high.logpdf = [&high_calls](const Eigen::VectorXd& t) {
    ++high_calls;
    return -1.2 * t.squaredNorm();
  };
  stack.fidelities = {std::move(low), std::move(high)};

  SurrogateBuildOptions o = small_build(30, 12, 13);
  o.n_test = 40;
  o.mse_threshold = 1e-9;  // unreachable: the budget must be exhausted
  SurrogateBuildReport report;
  MfSurrogate s = build_mfgp(stack, o, &report);

  CHECK(stack.low().call_count() == low_calls);
  CHECK(stack.high().call_count() == high_calls);
  CHECK(s.offline_low_evals == low_calls);
  CHECK(s.offline_high_evals == high_calls);
  CHECK(report.high_design_size == 12);
  CHECK(high_calls == 12 + 40);          // training budget + test targets
  CHECK(low_calls == 30 + report.points_added);
  CHECK_FALSE(s.mse_threshold_reached);
}

TEST_CASE("the returned variant wins the validation comparison") {
  FidelityStack stack = rosenbrock_like_stack();
  SurrogateBuildReport report;
  MfSurrogate s = build_mfgp(stack, small_build(50, 20, 37), &report);
  const double winner = s.validation_mse;
  CHECK(winner <= report.nargp_mse);
  CHECK(winner <= report.gpdf_mse);
  CHECK(winner == std::min(report.nargp_mse, report.gpdf_mse));
}

TEST_CASE("serialization round-trips evaluations bit for bit") {
  FidelityStack stack = rosenbrock_like_stack();
  SurrogateBuildOptions o = small_build(40, 16, 41);
  o.train_nargp = false;  // exercise the gpdf branch with its lag vector
  MfSurrogate s = build_mfgp(stack, o);

  const std::string path =
      (std::filesystem::temp_directory_path() / "mfnuts_surrogate_test.json").string();
  save_surrogate(s, path);
  MfSurrogate loaded = load_surrogate(path);
  std::filesystem::remove(path);

  CHECK(loaded.variant == s.variant);
  CHECK(loaded.validation_mse == s.validation_mse);
  CHECK((loaded.lag - s.lag).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.offline_high_evals == s.offline_high_evals);
  RandomStream rng(6);
  Eigen::MatrixXd pts = uniform_box(20, stack.lower, stack.upper, rng);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    CHECK(loaded.logpdf(pts.row(i)) == s.logpdf(pts.row(i)));
    CHECK(loaded.variance(pts.row(i)) == s.variance(pts.row(i)));
    CHECK((loaded.grad(pts.row(i)) - s.grad(pts.row(i))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("build rejects malformed budgets") {
  FidelityStack stack = quadratic_stack(2, 1.0);
  SurrogateBuildOptions o = small_build(10, 3, 1);  // n_high < d + 2
  CHECK_THROWS_AS(build_mfgp(stack, o), std::invalid_argument);
  SurrogateBuildOptions o2 = small_build(8, 12, 1);  // high design larger than low
  CHECK_THROWS_AS(build_mfgp(stack, o2), std::invalid_argument);
}

}  // TEST_SUITE
