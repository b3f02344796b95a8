#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

namespace mfnuts::pde {

// Sum of isotropic bivariate Gaussian sources on the unit square.
struct SourceSpec {
  Eigen::VectorXd intensities;                          // theta_i
  Eigen::Matrix<double, Eigen::Dynamic, 2> locations;   // mu_i, strictly inside (0,1)^2
  Eigen::VectorXd variances;                            // sigma_i^2 > 0
};

// Interior nodes of an n x n mesh on the unit square with spacing 1/n. The
// zero Dirichlet boundary is implicit and never stored; values(i, j)
// approximates u((i+1) h, (j+1) h).
struct Field {
  int n = 0;
  Eigen::MatrixXd values;  // (n-1) x (n-1)

  double spacing() const { return 1.0 / n; }
};

// S(X) = sum_i theta_i * (2 pi sigma_i^2)^{-1} exp(-|X - mu_i|^2 / (2 sigma_i^2))
// evaluated at the interior nodes.
Field source_field(const SourceSpec& spec, int n);

// Solves kappa * laplacian(u) = S with zero Dirichlet boundary using the
// 5-point stencil and matrix-free conjugate gradients to relative residual
// 1e-10. Throws std::runtime_error if CG does not converge in 10 n^2
// iterations.
Field solve_poisson(double kappa, const Field& source);

// bilinear interpolation at each location (boundary values are zero)
Eigen::VectorXd probe(const Field& field, const std::vector<Eigen::Vector2d>& locations);

// row-major interior grid dump
void write_csv(const Field& field, std::ostream& out);

}  // namespace mfnuts::pde
