#include "mfnuts/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "mfnuts/nelder_mead.hpp"
#include "mfnuts/random.hpp"

namespace mfnuts {

namespace {

Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& inputs) {
  const Eigen::Index n = inputs.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = kernel_eval(kernel, inputs.row(i), inputs.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

}  // namespace

GpModel::GpModel(Eigen::MatrixXd inputs, Eigen::VectorXd targets, Kernel kernel,
                 double noise_variance)
    : inputs_(std::move(inputs)),
      targets_(std::move(targets)),
      kernel_(std::move(kernel)),
      noise_variance_(noise_variance) {
  if (inputs_.rows() != targets_.size() || targets_.size() < 1)
    throw std::invalid_argument("GpModel: inputs/targets shape mismatch");
  if (inputs_.cols() != kernel_input_dim(kernel_))
    throw std::invalid_argument("GpModel: kernel dimension mismatch");
  factorize();
}

void GpModel::factorize() {
  const Eigen::Index n = targets_.size();
  target_mean_ = targets_.mean();
  Eigen::MatrixXd K = kernel_matrix(kernel_, inputs_);
  const double scale = K.trace() / static_cast<double>(n);
  Eigen::VectorXd centered = targets_.array() - target_mean_;
  for (double jitter = 1e-10 * scale;; jitter *= 10.0) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise_variance_ + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      chol_ = llt.matrixL();
      alpha_ = llt.solve(centered);
      jitter_ = jitter;
      return;
    }
    if (jitter >= 1e-4 * scale)
      throw SingularKernelError("GpModel: kernel matrix not positive definite after jitter escalation");
  }
}

GpPrediction GpModel::predict(const Eigen::VectorXd& x) const {
  const Eigen::Index n = size();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_eval(kernel_, x, inputs_.row(i));
  GpPrediction out;
  out.mean = k.dot(alpha_) + target_mean_;
  Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  double prior = kernel_prior_variance(kernel_);
  double var = prior - v.squaredNorm();
  out.variance = std::clamp(var, 0.0, prior + noise_variance_);
  return out;
}

double GpModel::predict_mean(const Eigen::VectorXd& x) const {
  const Eigen::Index n = size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += alpha_[i] * kernel_eval(kernel_, x, inputs_.row(i));
  return acc + target_mean_;
}

Eigen::VectorXd GpModel::predict_mean_grad(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < size(); ++i) g += alpha_[i] * kernel_grad_x(kernel_, x, inputs_.row(i));
  return g;
}

void GpModel::predict_mean_and_grad(const Eigen::VectorXd& x, double& mean,
                                    Eigen::VectorXd& grad) const {
  mean = 0.0;
  grad = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    mean += alpha_[i] * kernel_eval(kernel_, x, inputs_.row(i));
    grad += alpha_[i] * kernel_grad_x(kernel_, x, inputs_.row(i));
  }
  mean += target_mean_;
}

double GpModel::log_marginal_likelihood() const {
  const auto n = static_cast<double>(size());
  Eigen::VectorXd centered = targets_.array() - target_mean_;
  double quad = 0.5 * centered.dot(alpha_);
  double logdet = chol_.diagonal().array().log().sum();
  return -quad - logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

void GpModel::append_point(const Eigen::VectorXd& x, double y) {
  inputs_.conservativeResize(inputs_.rows() + 1, Eigen::NoChange);
  inputs_.row(inputs_.rows() - 1) = x.transpose();
  targets_.conservativeResize(targets_.size() + 1);
  targets_[targets_.size() - 1] = y;
  factorize();
}

GpModel gp_fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
               const Kernel& kernel_shape, double noise_variance, const GpFitOptions& options) {
  const Eigen::Index n = inputs.rows();
  if (n < 1) throw std::invalid_argument("gp_fit: need at least one observation");
  const Eigen::Index q = kernel_num_params(kernel_shape);
  const Eigen::Index dim = q + (options.train_noise ? 1 : 0);

  // scales for the initial points
  Eigen::VectorXd ranges(inputs.cols());
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    double r = inputs.col(j).maxCoeff() - inputs.col(j).minCoeff();
    ranges[j] = r > 1e-12 ? r : 1.0;
  }
  double tvar = n > 1 ? (targets.array() - targets.mean()).square().sum() / (n - 1) : 1.0;
  if (tvar < 1e-12) tvar = 1.0;

  // maps a kernel-parameter index to the range of the input column it scales;
  // variance entries get the target variance
  auto param_scale = [&](Eigen::Index idx) -> std::pair<bool, double> {
    if (const auto* se = std::get_if<SquaredExponential>(&kernel_shape)) {
      (void)se;
      if (idx == 0) return {true, tvar};
      return {false, ranges[idx - 1]};
    }
    const auto& c = std::get<NargpComposite>(kernel_shape);
    const Eigen::Index pf = c.k_f.lengthscales.size(), pt = c.k_rho.lengthscales.size();
    if (idx == 0) return {true, tvar};
    if (idx <= pf) return {false, ranges[idx - 1]};
    idx -= 1 + pf;
    if (idx < pt) return {false, ranges[pf + idx]};
    idx -= pt;
    if (idx == 0) return {true, tvar};
    return {false, ranges[pf + idx - 1]};
  };

  // Search box = the multi-start initialization box. Unbounded searches drift
  // to degenerate kernels (lengthscales far beyond the data range with huge
  // variances) whose near-singular Gram matrices turn predictions into
  // catastrophic cancellations.
  Eigen::VectorXd lower(dim), upper(dim);
  for (Eigen::Index i = 0; i < q; ++i) {
    auto [is_var, scale] = param_scale(i);
    lower[i] = std::log(is_var ? 1e-2 * scale : 1e-2 * scale);
    upper[i] = std::log(is_var ? 1e2 * scale : 1e1 * scale);
  }
  if (options.train_noise) {
    lower[q] = std::log(options.noise_floor);
    upper[q] = std::log(std::max(tvar, 2.0 * options.noise_floor));
  }

  auto objective = [&](const Eigen::VectorXd& log_params) -> double {
    Kernel k = kernel_unpack_log(kernel_shape, log_params.head(q));
    double noise = options.train_noise ? std::max(std::exp(log_params[q]), options.noise_floor)
                                       : std::max(noise_variance, 0.0);
    try {
      GpModel m(inputs, targets, k, noise);
      return -m.log_marginal_likelihood();
    } catch (const SingularKernelError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  RandomStream rng(options.seed);
  std::vector<Eigen::VectorXd> starts;
  {
    // heuristic center: mid lengthscales, target-variance signal, small noise
    Eigen::VectorXd s(dim);
    for (Eigen::Index i = 0; i < q; ++i) {
      auto [is_var, scale] = param_scale(i);
      s[i] = std::log(is_var ? scale : 0.5 * scale);
    }
    if (options.train_noise) s[q] = std::log(std::max(1e-6 * tvar, options.noise_floor));
    starts.push_back(s);
  }
  for (int t = 1; t < options.n_starts; ++t) {
    Eigen::VectorXd s(dim);
    for (Eigen::Index i = 0; i < q; ++i) {
      auto [is_var, scale] = param_scale(i);
      double lo = is_var ? 1e-2 * scale : 1e-2 * scale;
      double hi = is_var ? 1e2 * scale : 1e1 * scale;
      s[i] = std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo));
    }
    if (options.train_noise)
      s[q] = std::log(1e-8 * tvar) + rng.uniform() * (std::log(1e-2 * tvar) - std::log(1e-8 * tvar));
    starts.push_back(s);
  }
  for (const auto& w : options.warm_starts)
    if (w.size() == dim) starts.push_back(w);

  NelderMeadOptions nm;
  nm.max_iterations = options.max_iterations > 0 ? options.max_iterations
                                                 : static_cast<int>(60 * dim + 100);
  nm.initial_step = 0.5;

  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  if (options.info) options.info->start_lml.clear();
  for (Eigen::VectorXd s : starts) {
    s = s.cwiseMax(lower).cwiseMin(upper);
    if (options.info) options.info->start_lml.push_back(-objective(s));
    NelderMeadResult r = nelder_mead(objective, s, nm, lower, upper);
    if (r.value < best_value) {
      best_value = r.value;
      best = r.x;
    }
  }
  if (!best.size()) throw SingularKernelError("gp_fit: no feasible hyperparameters found");
  if (options.info) options.info->final_lml = -best_value;

  Kernel k = kernel_unpack_log(kernel_shape, best.head(q));
  double noise = options.train_noise ? std::max(std::exp(best[q]), options.noise_floor)
                                     : std::max(noise_variance, 0.0);
  return GpModel(inputs, targets, k, noise);
}

nlohmann::json gp_to_json(const GpModel& model) {
  const auto& X = model.inputs();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    rows[static_cast<std::size_t>(i)].assign(X.row(i).begin(), X.row(i).end());
  nlohmann::json j;
  j["inputs"] = rows;
  j["targets"] = std::vector<double>(model.targets().begin(), model.targets().end());
  j["kernel"] = model.kernel();
  j["noise_variance"] = model.noise_variance();
  return j;
}

GpModel gp_from_json(const nlohmann::json& j) {
  auto rows = j.at("inputs").get<std::vector<std::vector<double>>>();
  auto targets = j.at("targets").get<std::vector<double>>();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = n > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    X.row(i) = Eigen::Map<const Eigen::VectorXd>(rows[static_cast<std::size_t>(i)].data(), p);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return GpModel(X, y, kernel_from_json(j.at("kernel")), j.at("noise_variance").get<double>());
}

}  // namespace mfnuts
