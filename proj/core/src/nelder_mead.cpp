#include "mfnuts/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mfnuts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void clamp_into(Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() == 0) return;
  x = x.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  const Eigen::Index n = x0.size();
  auto safe_eval = [&](Eigen::VectorXd& x) {
    clamp_into(x, lower, upper);
    double v = f(x);
    return std::isfinite(v) ? v : kInf;
  };

  // simplex: n+1 vertices
  std::vector<Eigen::VectorXd> verts(n + 1, x0);
  std::vector<double> vals(n + 1);
  clamp_into(verts[0], lower, upper);
  vals[0] = safe_eval(verts[0]);
  for (Eigen::Index i = 0; i < n; ++i) {
    double step = options.initial_step * std::max(1.0, std::abs(x0[i]));
    verts[i + 1][i] += step;
    vals[i + 1] = safe_eval(verts[i + 1]);
  }

  NelderMeadResult result;
  std::vector<int> order(n + 1);
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    int best = order[0], worst = order[n], second_worst = order[n > 0 ? n - 1 : 0];

    double f_spread = std::abs(vals[worst] - vals[best]);
    double x_spread = 0.0;
    for (int k = 1; k <= n; ++k) x_spread = std::max(x_spread, (verts[order[k]] - verts[best]).norm());
    if (std::isfinite(vals[worst]) && f_spread < options.f_tolerance && x_spread < options.x_tolerance) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int k = 0; k <= n; ++k)
      if (k != worst) centroid += verts[k];
    centroid /= static_cast<double>(n);

    // reflection
    Eigen::VectorXd xr = centroid + (centroid - verts[worst]);
    double fr = safe_eval(xr);
    if (fr < vals[best]) {
      // expansion
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - verts[worst]);
      double fe = safe_eval(xe);
      if (fe < fr) {
        verts[worst] = xe;
        vals[worst] = fe;
      } else {
        verts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second_worst]) {
      verts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    // contraction (outside if the reflected point improved on the worst)
    Eigen::VectorXd xc;
    if (fr < vals[worst]) {
      xc = centroid + 0.5 * (xr - centroid);
    } else {
      xc = centroid + 0.5 * (verts[worst] - centroid);
    }
    double fc = safe_eval(xc);
    if (fc < std::min(fr, vals[worst])) {
      verts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    // shrink toward best
    for (int k = 0; k <= n; ++k) {
      if (k == best) continue;
      verts[k] = verts[best] + 0.5 * (verts[k] - verts[best]);
      vals[k] = safe_eval(verts[k]);
    }
  }

  auto best_it = std::min_element(vals.begin(), vals.end());
  result.x = verts[static_cast<std::size_t>(best_it - vals.begin())];
  result.value = *best_it;
  result.iterations = iter;
  return result;
}

}  // namespace mfnuts
