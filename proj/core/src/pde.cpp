#include "mfnuts/pde.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace mfnuts::pde {

namespace {

// v = -laplacian_h(u) on the interior, zero Dirichlet neighbors
void apply_neg_laplacian(const Eigen::MatrixXd& u, double inv_h2, Eigen::MatrixXd& v) {
  const Eigen::Index m = u.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double nb = 0.0;
      if (i > 0) nb += u(i - 1, j);
      if (i + 1 < m) nb += u(i + 1, j);
      if (j > 0) nb += u(i, j - 1);
      if (j + 1 < m) nb += u(i, j + 1);
      v(i, j) = (4.0 * u(i, j) - nb) * inv_h2;
    }
  }
}

}  // namespace

Field source_field(const SourceSpec& spec, int n) {
  if (n < 4) throw std::invalid_argument("source_field: mesh size must be >= 4");
  const Eigen::Index k = spec.intensities.size();
  if (spec.locations.rows() != k || spec.variances.size() != k)
    throw std::invalid_argument("source_field: inconsistent source specification");

  Field f;
  f.n = n;
  f.values = Eigen::MatrixXd::Zero(n - 1, n - 1);
  const double h = f.spacing();
  for (Eigen::Index s = 0; s < k; ++s) {
    const double var = spec.variances[s];
    const double norm = spec.intensities[s] / (2.0 * std::numbers::pi * var);
    const double mx = spec.locations(s, 0), my = spec.locations(s, 1);
    for (int i = 1; i < n; ++i) {
      for (int j = 1; j < n; ++j) {
        double dx = i * h - mx, dy = j * h - my;
        f.values(i - 1, j - 1) += norm * std::exp(-(dx * dx + dy * dy) / (2.0 * var));
      }
    }
  }
  return f;
}

Field solve_poisson(double kappa, const Field& source) {
  if (kappa <= 0.0) throw std::invalid_argument("solve_poisson: kappa must be positive");
  const int n = source.n;
  const Eigen::Index m = source.values.rows();
  const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);

  Field out;
  out.n = n;
  out.values = Eigen::MatrixXd::Zero(m, m);

  // kappa * lap(u) = S  =>  (-lap_h) u = -S / kappa, SPD system solved by CG
  Eigen::MatrixXd b = -source.values / kappa;
  const double b_norm = b.norm();
  if (b_norm == 0.0) return out;

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd r = b;
  Eigen::MatrixXd p = r;
  Eigen::MatrixXd Ap(m, m);
  double rs = r.squaredNorm();
  const double tol = 1e-10 * b_norm;
  const long long max_iter = 10LL * n * n;
  for (long long it = 0; it < max_iter; ++it) {
    apply_neg_laplacian(p, inv_h2, Ap);
    const double alpha = rs / p.cwiseProduct(Ap).sum();
    x += alpha * p;
    r -= alpha * Ap;
    const double rs_next = r.squaredNorm();
    if (std::sqrt(rs_next) <= tol) {
      out.values = x;
      return out;
    }
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  throw std::runtime_error("solve_poisson: conjugate gradients did not converge");
}

Eigen::VectorXd probe(const Field& field, const std::vector<Eigen::Vector2d>& locations) {
  const int n = field.n;
  auto node = [&](int i, int j) -> double {
    if (i <= 0 || i >= n || j <= 0 || j >= n) return 0.0;
    return field.values(i - 1, j - 1);
  };
  Eigen::VectorXd out(static_cast<Eigen::Index>(locations.size()));
  for (std::size_t q = 0; q < locations.size(); ++q) {
    const double x = locations[q][0], y = locations[q][1];
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
      throw std::invalid_argument("probe: location outside the unit square");
    double gx = x * n, gy = y * n;
    int i0 = std::min(static_cast<int>(gx), n - 1);
    int j0 = std::min(static_cast<int>(gy), n - 1);
    double fx = gx - i0, fy = gy - j0;
    out[static_cast<Eigen::Index>(q)] =
        (1 - fx) * (1 - fy) * node(i0, j0) + fx * (1 - fy) * node(i0 + 1, j0) +
        (1 - fx) * fy * node(i0, j0 + 1) + fx * fy * node(i0 + 1, j0 + 1);
  }
  return out;
}

void write_csv(const Field& field, std::ostream& out) {
  const Eigen::Index m = field.values.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j) out << ',';
      out << field.values(i, j);
    }
    out << '\n';
  }
}

}  // namespace mfnuts::pde
