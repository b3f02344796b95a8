#include "mfnuts/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mfnuts {

namespace {

// squared Mahalanobis distance over columns [start, start+len)
double se_quad(const SquaredExponential& k, const ConstVecRef& x, const ConstVecRef& y,
               Eigen::Index start, Eigen::Index len) {
  double q = 0.0;
  for (Eigen::Index j = 0; j < len; ++j) {
    double z = (x[start + j] - y[start + j]) / k.lengthscales[j];
    q += z * z;
  }
  return q;
}

double se_eval(const SquaredExponential& k, const ConstVecRef& x, const ConstVecRef& y,
               Eigen::Index start, Eigen::Index len) {
  return k.signal_variance * std::exp(-0.5 * se_quad(k, x, y, start, len));
}

// out[start + j] += w * kxy * -(x_j - y_j) / l_j^2
void se_grad_accum(const SquaredExponential& k, const ConstVecRef& x, const ConstVecRef& y,
                   Eigen::Index start, Eigen::Index len, double w_kxy, Eigen::VectorXd& out) {
  for (Eigen::Index j = 0; j < len; ++j)
    out[start + j] -=
        w_kxy * (x[start + j] - y[start + j]) / (k.lengthscales[j] * k.lengthscales[j]);
}

void check_dims(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2) {
  if (x.size() != x2.size() || x.size() != kernel_input_dim(kernel))
    throw std::invalid_argument("kernel_eval: input dimension mismatch");
}

nlohmann::json se_to_json(const SquaredExponential& k) {
  return {{"signal_variance", k.signal_variance},
          {"lengthscales", std::vector<double>(k.lengthscales.begin(), k.lengthscales.end())}};
}

SquaredExponential se_from_json(const nlohmann::json& j) {
  SquaredExponential k;
  k.signal_variance = j.at("signal_variance").get<double>();
  auto ls = j.at("lengthscales").get<std::vector<double>>();
  k.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  return k;
}

}  // namespace

Eigen::Index kernel_input_dim(const Kernel& kernel) {
  if (const auto* se = std::get_if<SquaredExponential>(&kernel)) return se->lengthscales.size();
  const auto& c = std::get<NargpComposite>(kernel);
  return c.k_f.lengthscales.size() + c.k_rho.lengthscales.size();
}

double kernel_eval(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2) {
  check_dims(kernel, x, x2);
  if (const auto* se = std::get_if<SquaredExponential>(&kernel))
    return se_eval(*se, x, x2, 0, x.size());
  const auto& c = std::get<NargpComposite>(kernel);
  const Eigen::Index pf = c.split, pt = x.size() - c.split;
  return se_eval(c.k_f, x, x2, 0, pf) * se_eval(c.k_rho, x, x2, pf, pt) +
         se_eval(c.k_delta, x, x2, pf, pt);
}

void kernel_grad_x_accum(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2,
                         double weight, Eigen::VectorXd& out) {
  check_dims(kernel, x, x2);
  if (const auto* se = std::get_if<SquaredExponential>(&kernel)) {
    se_grad_accum(*se, x, x2, 0, x.size(), weight * se_eval(*se, x, x2, 0, x.size()), out);
    return;
  }
  const auto& c = std::get<NargpComposite>(kernel);
  const Eigen::Index pf = c.split, pt = x.size() - c.split;
  const double kf = se_eval(c.k_f, x, x2, 0, pf);
  const double krho = se_eval(c.k_rho, x, x2, pf, pt);
  se_grad_accum(c.k_f, x, x2, 0, pf, weight * kf * krho, out);
  se_grad_accum(c.k_rho, x, x2, pf, pt, weight * kf * krho, out);
  se_grad_accum(c.k_delta, x, x2, pf, pt, weight * se_eval(c.k_delta, x, x2, pf, pt), out);
}

Eigen::VectorXd kernel_grad_x(const Kernel& kernel, const ConstVecRef& x, const ConstVecRef& x2) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  kernel_grad_x_accum(kernel, x, x2, 1.0, g);
  return g;
}

double kernel_prior_variance(const Kernel& kernel) {
  if (const auto* se = std::get_if<SquaredExponential>(&kernel)) return se->signal_variance;
  const auto& c = std::get<NargpComposite>(kernel);
  return c.k_f.signal_variance * c.k_rho.signal_variance + c.k_delta.signal_variance;
}

Eigen::Index kernel_num_params(const Kernel& kernel) {
  if (const auto* se = std::get_if<SquaredExponential>(&kernel)) return 1 + se->lengthscales.size();
  const auto& c = std::get<NargpComposite>(kernel);
  return (1 + c.k_f.lengthscales.size()) + c.k_rho.lengthscales.size() +
         (1 + c.k_delta.lengthscales.size());
}

Eigen::VectorXd kernel_pack_log(const Kernel& kernel) {
  Eigen::VectorXd p(kernel_num_params(kernel));
  if (const auto* se = std::get_if<SquaredExponential>(&kernel)) {
    p[0] = std::log(se->signal_variance);
    p.tail(se->lengthscales.size()) = se->lengthscales.array().log();
    return p;
  }
  const auto& c = std::get<NargpComposite>(kernel);
  Eigen::Index at = 0;
  p[at++] = std::log(c.k_f.signal_variance);
  for (Eigen::Index j = 0; j < c.k_f.lengthscales.size(); ++j) p[at++] = std::log(c.k_f.lengthscales[j]);
  for (Eigen::Index j = 0; j < c.k_rho.lengthscales.size(); ++j) p[at++] = std::log(c.k_rho.lengthscales[j]);
  p[at++] = std::log(c.k_delta.signal_variance);
  for (Eigen::Index j = 0; j < c.k_delta.lengthscales.size(); ++j) p[at++] = std::log(c.k_delta.lengthscales[j]);
  return p;
}

Kernel kernel_unpack_log(const Kernel& shape, const Eigen::VectorXd& log_params) {
  if (log_params.size() != kernel_num_params(shape))
    throw std::invalid_argument("kernel_unpack_log: parameter count mismatch");
  if (const auto* se = std::get_if<SquaredExponential>(&shape)) {
    SquaredExponential k = *se;
    k.signal_variance = std::exp(log_params[0]);
    k.lengthscales = log_params.tail(se->lengthscales.size()).array().exp();
    return k;
  }
  NargpComposite c = std::get<NargpComposite>(shape);
  Eigen::Index at = 0;
  c.k_f.signal_variance = std::exp(log_params[at++]);
  for (Eigen::Index j = 0; j < c.k_f.lengthscales.size(); ++j) c.k_f.lengthscales[j] = std::exp(log_params[at++]);
  for (Eigen::Index j = 0; j < c.k_rho.lengthscales.size(); ++j) c.k_rho.lengthscales[j] = std::exp(log_params[at++]);
  c.k_rho.signal_variance = 1.0;
  c.k_delta.signal_variance = std::exp(log_params[at++]);
  for (Eigen::Index j = 0; j < c.k_delta.lengthscales.size(); ++j) c.k_delta.lengthscales[j] = std::exp(log_params[at++]);
  return c;
}

void to_json(nlohmann::json& j, const Kernel& kernel) {
  if (const auto* se = std::get_if<SquaredExponential>(&kernel)) {
    j = se_to_json(*se);
    j["type"] = "squared_exponential";
    return;
  }
  const auto& c = std::get<NargpComposite>(kernel);
  j = {{"type", "nargp_composite"},
       {"split", c.split},
       {"k_f", se_to_json(c.k_f)},
       {"k_rho", se_to_json(c.k_rho)},
       {"k_delta", se_to_json(c.k_delta)}};
}

Kernel kernel_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "squared_exponential") return se_from_json(j);
  if (type == "nargp_composite") {
    NargpComposite c;
    c.split = j.at("split").get<Eigen::Index>();
    c.k_f = se_from_json(j.at("k_f"));
    c.k_rho = se_from_json(j.at("k_rho"));
    c.k_delta = se_from_json(j.at("k_delta"));
    return c;
  }
  throw std::invalid_argument("kernel_from_json: unknown kernel type '" + type + "'");
}

}  // namespace mfnuts
