#include "mfnuts/design.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace mfnuts {

Eigen::MatrixXd latin_hypercube(int n, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("latin_hypercube: n must be >= 1");
  const Eigen::Index d = lower.size();
  Eigen::MatrixXd points(n, d);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    for (int i = 0; i < n; ++i) {
      double u = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / n;
      points(i, j) = lower[j] + u * (upper[j] - lower[j]);
    }
  }
  return points;
}

Eigen::MatrixXd uniform_box(int n, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                            RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("uniform_box: n must be >= 1");
  const Eigen::Index d = lower.size();
  Eigen::MatrixXd points(n, d);
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      points(i, j) = lower[j] + rng.uniform() * (upper[j] - lower[j]);
  return points;
}

}  // namespace mfnuts
