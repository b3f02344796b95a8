#pragma once

#include <deque>
#include <functional>

#include <Eigen/Dense>

#include "mfnuts/kernel.hpp"
#include "mfnuts/random.hpp"

namespace testhelpers {

// RandomStream whose next draws can be forced; falls back to the seeded
// stream when a queue is empty.
class ForcedStream : public mfnuts::RandomStream {
 public:
  explicit ForcedStream(std::uint64_t seed = 0) : RandomStream(seed) {}

  std::deque<double> uniforms;
  std::deque<double> normals;

  double uniform() override {
    if (uniforms.empty()) return RandomStream::uniform();
    double v = uniforms.front();
    uniforms.pop_front();
    return v;
  }
  double normal() override {
    if (normals.empty()) return RandomStream::normal();
    double v = normals.front();
    normals.pop_front();
    return v;
  }
};

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// componentwise |value - reference| <= rel_tol * max(|value|, |reference|)
// + fd_noise, the additive term covering the differencing oracle's own
// evaluation noise
inline bool gradients_agree(const Eigen::VectorXd& value, const Eigen::VectorXd& reference,
                            double rel_tol = 1e-4, double fd_noise = 1e-7) {
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    if (std::abs(value[i] - reference[i]) >
        rel_tol * std::max(std::abs(reference[i]), std::abs(value[i])) + fd_noise)
      return false;
  }
  return true;
}

// Textbook GP posterior via a dense LU inverse; an inference route
// independent of the Cholesky path under test. Centers targets by their mean
// like the production model.
struct ReferenceGp {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  mfnuts::Kernel kernel;
  double noise = 0.0;

  Eigen::MatrixXd gram() const {
    const Eigen::Index n = inputs.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        K(i, j) = mfnuts::kernel_eval(kernel, inputs.row(i), inputs.row(j));
    K.diagonal().array() += noise;
    return K;
  }

  double mean(const Eigen::VectorXd& x) const {
    const Eigen::Index n = inputs.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = mfnuts::kernel_eval(kernel, x, inputs.row(i));
    const double m0 = targets.mean();
    Eigen::VectorXd centered = targets.array() - m0;
    return k.dot(gram().fullPivLu().solve(centered)) + m0;
  }

  double variance(const Eigen::VectorXd& x) const {
    const Eigen::Index n = inputs.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = mfnuts::kernel_eval(kernel, x, inputs.row(i));
    return mfnuts::kernel_prior_variance(kernel) - k.dot(gram().fullPivLu().solve(k));
  }
};

}  // namespace testhelpers
