#pragma once

#include <variant>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace mfnuts {

// accepts both contiguous vectors and matrix rows without copying
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd, 0, Eigen::InnerStride<>>;

// k(x, y) = sv * exp(-1/2 * sum_j (x_j - y_j)^2 / l_j^2), one lengthscale per
// input dimension.
struct SquaredExponential {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
};

// Composite fusion kernel over inputs laid out as [f-features | theta]:
//   k(x, y) = k_f(x_f, y_f) * k_rho(x_t, y_t) + k_delta(x_t, y_t)
// `split` is the number of leading f-feature columns. k_rho's signal variance
// is pinned to 1 (it multiplies k_f's, so a free value would be redundant).
struct NargpComposite {
  SquaredExponential k_f;
  SquaredExponential k_rho;
  SquaredExponential k_delta;
  Eigen::Index split = 1;
};

using Kernel = std::variant<SquaredExponential, NargpComposite>;

Eigen::Index kernel_input_dim(const Kernel& kernel);

// k(x, x2); symmetric in its arguments. Throws std::invalid_argument on a
// dimension mismatch.
double kernel_eval(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2);

// accumulates weight * grad_x k(x, x2) into out
void kernel_grad_x_accum(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2,
                         double weight, Eigen::VectorXd& out);

// gradient of kernel_eval with respect to the first argument
Eigen::VectorXd kernel_grad_x(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2);

// k(x, x), independent of x for both variants
double kernel_prior_variance(const Kernel& kernel);

// Trainable hyperparameters in log space. For SquaredExponential:
// [log sv, log l_1..l_p]. For NargpComposite: [log sv_f, log l_f...,
// log l_rho..., log sv_delta, log l_delta...] (k_rho's variance is pinned).
Eigen::Index kernel_num_params(const Kernel& kernel);
Eigen::VectorXd kernel_pack_log(const Kernel& kernel);
Kernel kernel_unpack_log(const Kernel& shape, const Eigen::VectorXd& log_params);

void to_json(nlohmann::json& j, const Kernel& kernel);
Kernel kernel_from_json(const nlohmann::json& j);

}  // namespace mfnuts
