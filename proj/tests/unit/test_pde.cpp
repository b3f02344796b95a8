#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "doctest.h"
#include "mfnuts/pde.hpp"
#include "mfnuts/problems.hpp"

using namespace mfnuts;
using pde::Field;
using pde::SourceSpec;

namespace {

SourceSpec single_source(double intensity, double x, double y, double var) {
  SourceSpec s;
  s.intensities = Eigen::VectorXd::Constant(1, intensity);
  s.locations.resize(1, 2);
  s.locations << x, y;
  s.variances = Eigen::VectorXd::Constant(1, var);
  return s;
}

// S = -2 pi^2 sin(pi x) sin(pi y), the source whose solution is
// u = sin(pi x) sin(pi y) under kappa = 1
Field manufactured_source(int n) {
  Field f;
  f.n = n;
  f.values.resize(n - 1, n - 1);
  const double h = 1.0 / n;
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      f.values(i - 1, j - 1) = -2.0 * std::numbers::pi * std::numbers::pi *
                               std::sin(std::numbers::pi * i * h) * std::sin(std::numbers::pi * j * h);
  return f;
}

double manufactured_max_error(int n) {
  Field u = pde::solve_poisson(1.0, manufactured_source(n));
  const double h = 1.0 / n;
  double err = 0.0;
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      err = std::max(err, std::abs(u.values(i - 1, j - 1) - std::sin(std::numbers::pi * i * h) *
                                                                std::sin(std::numbers::pi * j * h)));
  return err;
}

}  // namespace

TEST_SUITE("pde") {

TEST_CASE("zero intensities give a zero source field and zero solution") {
  SourceSpec s = single_source(0.0, 0.5, 0.5, 0.01);
  Field f = pde::source_field(s, 16);
  CHECK(f.values.cwiseAbs().maxCoeff() == 0.0);
  Field u = pde::solve_poisson(1.0, f);
  CHECK(u.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("centered source field is symmetric under both axis reflections") {
  Field f = pde::source_field(single_source(1.3, 0.5, 0.5, 0.02), 32);
  const Eigen::Index m = f.values.rows();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      CHECK(f.values(i, j) == doctest::Approx(f.values(m - 1 - i, j)).epsilon(1e-12));
      CHECK(f.values(i, j) == doctest::Approx(f.values(i, m - 1 - j)).epsilon(1e-12));
    }
}

TEST_CASE("normalized Gaussian peak value at its own node") {
  const int n = 8;  // (0.5, 0.5) is the interior node (n/2-1, n/2-1)
  Field f = pde::source_field(single_source(1.0, 0.5, 0.5, 0.01), n);
  CHECK(f.values(n / 2 - 1, n / 2 - 1) ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi * 0.01)).epsilon(1e-12));
}

TEST_CASE("manufactured solution converges at second order") {
  const double e32 = manufactured_max_error(32);
  const double e64 = manufactured_max_error(64);
  CHECK(e32 / e64 >= 3.5);
}

TEST_CASE("the symmetric four-source layout solves to an x-y symmetric field") {
  SourceSpec s;
  s.intensities = Eigen::VectorXd::Constant(4, 1.0);
  s.locations.resize(4, 2);
  s.locations << 0.33, 0.33, 0.33, 0.67, 0.67, 0.33, 0.67, 0.67;
  s.variances = Eigen::VectorXd::Constant(4, 0.01);
  Field u = pde::solve_poisson(1.0, pde::source_field(s, 32));
  for (Eigen::Index i = 0; i < u.values.rows(); ++i)
    for (Eigen::Index j = 0; j < u.values.cols(); ++j)
      CHECK(std::abs(u.values(i, j) - u.values(j, i)) <= 1e-9);
}

TEST_CASE("probe returns exact nodal values and zero on the boundary") {
  Field u = pde::solve_poisson(1.0, manufactured_source(16));
  Eigen::VectorXd vals = pde::probe(u, {{4.0 / 16.0, 7.0 / 16.0}, {0.0, 0.5}, {1.0, 0.25}, {0.5, 1.0}});
  CHECK(vals[0] == doctest::Approx(u.values(3, 6)).epsilon(1e-14));
  CHECK(vals[1] == 0.0);
  CHECK(vals[2] == 0.0);
  CHECK(vals[3] == 0.0);
}

TEST_CASE("probing the manufactured solution at the center") {
  Field u = pde::solve_poisson(1.0, manufactured_source(64));
  Eigen::VectorXd v = pde::probe(u, {{0.5, 0.5}});
  CHECK(std::abs(v[0] - 1.0) <= 5e-3);
}

TEST_CASE("solver is linear in the source") {
  SourceSpec s1 = single_source(1.0, 0.3, 0.4, 0.02);
  SourceSpec s2 = single_source(1.0, 0.7, 0.6, 0.015);
  const int n = 16;
  Field f1 = pde::source_field(s1, n), f2 = pde::source_field(s2, n);
  Field combined;
  combined.n = n;
  combined.values = 2.0 * f1.values - 0.5 * f2.values;
  Field u_comb = pde::solve_poisson(1.0, combined);
  Field u1 = pde::solve_poisson(1.0, f1);
  Field u2 = pde::solve_poisson(1.0, f2);
  Eigen::MatrixXd expect = 2.0 * u1.values - 0.5 * u2.values;
  CHECK((u_comb.values - expect).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("discrete maximum principle") {
  // S >= 0 and kappa lap(u) = S force u <= 0; flipping the sign flips u
  Field f = pde::source_field(single_source(1.0, 0.4, 0.6, 0.02), 24);
  Field u = pde::solve_poisson(1.0, f);
  CHECK(u.values.maxCoeff() <= 1e-12);
  Field g;
  g.n = f.n;
  g.values = -f.values;
  Field w = pde::solve_poisson(1.0, g);
  CHECK(w.values.minCoeff() >= -1e-12);
}

TEST_CASE("kappa scales the solution inversely") {
  Field f = pde::source_field(single_source(1.0, 0.5, 0.5, 0.02), 16);
  Field u1 = pde::solve_poisson(1.0, f);
  Field u4 = pde::solve_poisson(4.0, f);
  CHECK((u1.values - 4.0 * u4.values).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("coarse and fine meshes genuinely disagree on the groundwater layout") {
  Eigen::VectorXd low = groundwater_forward(groundwater_true_intensities(), FidelityLevel::low);
  Eigen::VectorXd high = groundwater_forward(groundwater_true_intensities(), FidelityLevel::high);
  CHECK((low - high).cwiseAbs().maxCoeff() > 1e-4);
}

}  // TEST_SUITE
