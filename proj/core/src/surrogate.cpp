#include "mfnuts/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfnuts/design.hpp"
#include "mfnuts/nelder_mead.hpp"

namespace mfnuts {

namespace {

Eigen::Index gpdf_feature_count(Eigen::Index d) { return 2 * d + 1; }

// feature rows for a block of parameter points, means propagated through the
// low GP
Eigen::MatrixXd build_features(SurrogateVariant variant, const GpModel& low_gp,
                               const Eigen::VectorXd& lag, const Eigen::MatrixXd& thetas) {
  const Eigen::Index n = thetas.rows(), d = thetas.cols();
  const Eigen::Index nf = variant == SurrogateVariant::nargp ? 1 : gpdf_feature_count(d);
  Eigen::MatrixXd F(n, nf + d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd theta = thetas.row(i);
    F(i, 0) = low_gp.predict_mean(theta);
    if (variant == SurrogateVariant::gpdf) {
      for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd shifted = theta;
        shifted[j] = theta[j] + lag[j];
        F(i, 1 + j) = low_gp.predict_mean(shifted);
        shifted[j] = theta[j] - lag[j];
        F(i, 1 + d + j) = low_gp.predict_mean(shifted);
      }
    }
    F.row(i).tail(d) = theta.transpose();
  }
  return F;
}

Kernel high_kernel_shape(SurrogateVariant variant, Eigen::Index d) {
  NargpComposite c;
  const Eigen::Index nf = variant == SurrogateVariant::nargp ? 1 : gpdf_feature_count(d);
  c.k_f = {1.0, Eigen::VectorXd::Ones(nf)};
  c.k_rho = {1.0, Eigen::VectorXd::Ones(d)};
  c.k_delta = {1.0, Eigen::VectorXd::Ones(d)};
  c.split = nf;
  return c;
}

double validation_mse(const MfSurrogate& view, const Eigen::MatrixXd& test_theta,
                      const Eigen::VectorXd& test_targets) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < test_theta.rows(); ++i) {
    double diff = view.high_gp.predict_mean(view.features(test_theta.row(i))) - test_targets[i];
    acc += diff * diff;
  }
  return acc / static_cast<double>(test_theta.rows());
}

struct Candidate {
  SurrogateVariant variant;
  GpModel high_gp;
  bool fitted = false;
  double mse = std::numeric_limits<double>::infinity();
  Eigen::VectorXd warm;  // packed log hypers + log noise of the last fit
};

MfSurrogate assemble(const Candidate& c, const GpModel& low_gp, const Eigen::MatrixXd& high_theta,
                     const Eigen::VectorXd& lag, const Eigen::VectorXd& lower,
                     const Eigen::VectorXd& upper) {
  MfSurrogate s;
  s.variant = c.variant;
  s.low_gp = low_gp;
  s.high_gp = c.high_gp;
  s.high_theta = high_theta;
  s.lag = c.variant == SurrogateVariant::gpdf ? lag : Eigen::VectorXd();
  s.lower = lower;
  s.upper = upper;
  s.validation_mse = c.mse;
  return s;
}

Eigen::VectorXd packed_params(const GpModel& m) {
  Eigen::VectorXd p(kernel_num_params(m.kernel()) + 1);
  p.head(p.size() - 1) = kernel_pack_log(m.kernel());
  p[p.size() - 1] = std::log(std::max(m.noise_variance(), 1e-12));
  return p;
}

}  // namespace

std::string to_string(SurrogateVariant v) {
  return v == SurrogateVariant::nargp ? "nargp" : "gpdf";
}

SurrogateVariant surrogate_variant_from_string(const std::string& s) {
  if (s == "nargp") return SurrogateVariant::nargp;
  if (s == "gpdf") return SurrogateVariant::gpdf;
  throw std::invalid_argument("unknown surrogate variant '" + s + "'");
}

Eigen::Index MfSurrogate::feature_dim() const {
  return (variant == SurrogateVariant::nargp ? 1 : gpdf_feature_count(dimension())) + dimension();
}

bool MfSurrogate::in_bounds(const Eigen::VectorXd& theta) const {
  return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
}

Eigen::VectorXd MfSurrogate::features(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = dimension();
  Eigen::VectorXd f(feature_dim());
  f[0] = low_gp.predict_mean(theta);
  if (variant == SurrogateVariant::gpdf) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd shifted = theta;
      shifted[j] = theta[j] + lag[j];
      f[1 + j] = low_gp.predict_mean(shifted);
      shifted[j] = theta[j] - lag[j];
      f[1 + d + j] = low_gp.predict_mean(shifted);
    }
  }
  f.tail(d) = theta;
  return f;
}

double MfSurrogate::logpdf(const Eigen::VectorXd& theta) const {
  return high_gp.predict_mean(features(theta));
}

std::pair<double, Eigen::VectorXd> MfSurrogate::logpdf_and_grad(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = dimension();
  Eigen::VectorXd f(feature_dim());
  // low-GP means and gradients at the base point and, for GPDF, the lag points
  std::vector<Eigen::VectorXd> feature_grads;
  feature_grads.reserve(static_cast<std::size_t>(feature_dim() - d));
  double u0;
  Eigen::VectorXd du0;
  low_gp.predict_mean_and_grad(theta, u0, du0);
  f[0] = u0;
  feature_grads.push_back(du0);
  if (variant == SurrogateVariant::gpdf) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd shifted = theta;
      shifted[j] = theta[j] + lag[j];
      double u;
      Eigen::VectorXd du;
      low_gp.predict_mean_and_grad(shifted, u, du);
      f[1 + j] = u;
      feature_grads.push_back(du);
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd shifted = theta;
      shifted[j] = theta[j] - lag[j];
      double u;
      Eigen::VectorXd du;
      low_gp.predict_mean_and_grad(shifted, u, du);
      f[1 + d + j] = u;
      feature_grads.push_back(du);
    }
  }
  f.tail(d) = theta;

  double mean;
  Eigen::VectorXd w;
  high_gp.predict_mean_and_grad(f, mean, w);
  Eigen::VectorXd g = w.tail(d);
  for (std::size_t k = 0; k < feature_grads.size(); ++k)
    g += w[static_cast<Eigen::Index>(k)] * feature_grads[k];
  return {mean, g};
}

Eigen::VectorXd MfSurrogate::grad(const Eigen::VectorXd& theta) const {
  return logpdf_and_grad(theta).second;
}

double MfSurrogate::variance(const Eigen::VectorXd& theta) const {
  return high_gp.predict(features(theta)).variance;
}

GradTarget MfSurrogate::as_target() const {
  return [this](const Eigen::VectorXd& theta) { return logpdf_and_grad(theta); };
}

Eigen::VectorXd acquire_next_point(const MfSurrogate& surrogate, const Eigen::VectorXd& lower,
                                   const Eigen::VectorXd& upper, RandomStream& rng, int n_starts) {
  const Eigen::Index d = lower.size();
  if ((upper - lower).maxCoeff() <= 0.0) return lower;
  Eigen::MatrixXd seeds = latin_hypercube(n_starts, lower, upper, rng);
  auto neg_variance = [&](const Eigen::VectorXd& t) { return -surrogate.variance(t); };
  NelderMeadOptions nm;
  nm.max_iterations = static_cast<int>(80 + 40 * d);
  nm.initial_step = 0.1;
  Eigen::VectorXd best = seeds.row(0);
  double best_value = neg_variance(best);
  for (int s = 0; s < n_starts; ++s) {
    NelderMeadResult r = nelder_mead(neg_variance, seeds.row(s), nm, lower, upper);
    if (r.value < best_value) {
      best_value = r.value;
      best = r.x;
    }
  }
  return best;
}

MfSurrogate build_mfgp(const FidelityStack& stack, const SurrogateBuildOptions& options,
                       SurrogateBuildReport* report) {
  const Eigen::Index d = stack.dimension();
  if (stack.fidelities.size() < 2)
    throw std::invalid_argument("build_mfgp: need at least two fidelities");
  if (options.n_high < d + 2 || options.n_low < d + 2)
    throw std::invalid_argument("build_mfgp: budgets must be at least d + 2");
  if (options.n_low < options.n_high)
    throw std::invalid_argument("build_mfgp: the high design nests inside the low design");
  if (options.mse_threshold <= 0.0)
    throw std::invalid_argument("build_mfgp: mse_threshold must be positive");
  if (!options.train_nargp && !options.train_gpdf)
    throw std::invalid_argument("build_mfgp: no candidate variant selected");

  long long low_evals = 0, high_evals = 0;
  auto eval_low = [&](const Eigen::VectorXd& t) {
    ++low_evals;
    return stack.low()(t);
  };
  auto eval_high = [&](const Eigen::VectorXd& t) {
    ++high_evals;
    return stack.high()(t);
  };

  // nested designs: the initial high design is a random subset of the low one
  RandomStream design_rng(mix_seed(options.seed, 1));
  Eigen::MatrixXd low_theta = latin_hypercube(options.n_low, stack.lower, stack.upper, design_rng);
  Eigen::VectorXd low_y(options.n_low);
  for (int i = 0; i < options.n_low; ++i) low_y[i] = eval_low(low_theta.row(i));

  const int n0 = std::clamp(options.n_high / 2, static_cast<int>(std::min<Eigen::Index>(d + 2, options.n_high)),
                            options.n_high);
  std::vector<int> perm(static_cast<std::size_t>(options.n_low));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[design_rng.uniform_index(i)]);
  Eigen::MatrixXd high_theta(n0, d);
  Eigen::VectorXd high_y(n0);
  for (int i = 0; i < n0; ++i) {
    high_theta.row(i) = low_theta.row(perm[static_cast<std::size_t>(i)]);
    high_y[i] = eval_high(high_theta.row(i));
  }

  RandomStream test_rng(mix_seed(options.seed, 2));
  Eigen::MatrixXd test_theta = uniform_box(options.n_test, stack.lower, stack.upper, test_rng);
  Eigen::VectorXd test_y(options.n_test);
  for (int i = 0; i < options.n_test; ++i) test_y[i] = eval_high(test_theta.row(i));

  const bool degenerate =
      (high_y.array() - high_y.mean()).square().sum() / std::max<Eigen::Index>(n0 - 1, 1) < 1e-12;

  auto target_variance = [](const Eigen::VectorXd& y) {
    if (y.size() < 2) return 1.0;
    const double v = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
    return v > 1e-12 ? v : 1.0;
  };

  // Low GP hyperparameters are trained once on the full low design; later
  // nested additions only refactorize.
  Kernel low_shape = SquaredExponential{1.0, Eigen::VectorXd::Ones(d)};
  GpFitOptions low_fit;
  low_fit.n_starts = options.fit_starts;
  low_fit.max_iterations = options.low_fit_max_iterations;
  low_fit.seed = mix_seed(options.seed, 3);
  low_fit.noise_floor = std::max(1e-10, options.relative_noise_floor * target_variance(low_y));
  GpModel low_gp = gp_fit(low_theta, low_y, low_shape, 1e-8, low_fit);

  Eigen::VectorXd lag = options.lag_fraction * (stack.upper - stack.lower);

  std::vector<Candidate> candidates;
  if (options.train_nargp) {
    Candidate c;
    c.variant = SurrogateVariant::nargp;
    candidates.push_back(std::move(c));
  }
  if (options.train_gpdf) {
    Candidate c;
    c.variant = SurrogateVariant::gpdf;
    candidates.push_back(std::move(c));
  }

  // refactor_only rebuilds features and the factorization with the current
  // hyperparameters; a full or warm fit re-trains them
  auto fit_candidate = [&](Candidate& c, bool full, bool refactor_only, std::uint64_t salt) {
    Eigen::MatrixXd F = build_features(c.variant, low_gp, lag, high_theta);
    if (refactor_only && c.fitted) {
      c.high_gp = GpModel(F, high_y, c.high_gp.kernel(), c.high_gp.noise_variance());
    } else {
      GpFitOptions fit;
      fit.seed = mix_seed(options.seed, salt);
      fit.noise_floor = std::max(1e-10, options.relative_noise_floor * target_variance(high_y));
      if (full || !c.fitted) {
        fit.n_starts = options.fit_starts;
      } else {
        fit.n_starts = options.refit_starts;
        fit.max_iterations = options.refit_max_iterations > 0
                                 ? options.refit_max_iterations
                                 : static_cast<int>(25 * kernel_num_params(high_kernel_shape(c.variant, d)) + 50);
      }
      if (c.fitted) fit.warm_starts.push_back(c.warm);
      c.high_gp = gp_fit(F, high_y, high_kernel_shape(c.variant, d), 1e-8, fit);
      c.warm = packed_params(c.high_gp);
      c.fitted = true;
    }
    MfSurrogate view = assemble(c, low_gp, high_theta, lag, stack.lower, stack.upper);
    c.mse = validation_mse(view, test_theta, test_y);
  };

  RandomStream acq_rng(mix_seed(options.seed, 4));
  int added = 0;
  bool reached = false;
  for (std::uint64_t iter = 0;; ++iter) {
    const bool retrain = iter % static_cast<std::uint64_t>(std::max(options.refit_every, 1)) == 0;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      fit_candidate(candidates[k], iter == 0, !retrain, 10 + 100 * iter + k);
    auto best = std::min_element(candidates.begin(), candidates.end(),
                                 [](const Candidate& a, const Candidate& b) { return a.mse < b.mse; });
    if (best->mse <= options.mse_threshold) {
      reached = true;
      break;
    }
    if (high_theta.rows() >= options.n_high) break;

    MfSurrogate view = assemble(*best, low_gp, high_theta, lag, stack.lower, stack.upper);
    Eigen::VectorXd next =
        acquire_next_point(view, stack.lower, stack.upper, acq_rng, options.acquisition_starts);
    low_gp.append_point(next, eval_low(next));
    high_theta.conservativeResize(high_theta.rows() + 1, Eigen::NoChange);
    high_theta.row(high_theta.rows() - 1) = next.transpose();
    high_y.conservativeResize(high_y.size() + 1);
    high_y[high_y.size() - 1] = eval_high(next);
    ++added;
  }

  // Final full refit on features from the final low GP, so the stored models
  // match the prediction path exactly.
  for (std::size_t k = 0; k < candidates.size(); ++k) fit_candidate(candidates[k], true, false, 5 + k);
  auto best = std::min_element(candidates.begin(), candidates.end(),
                               [](const Candidate& a, const Candidate& b) { return a.mse < b.mse; });

  MfSurrogate result = assemble(*best, low_gp, high_theta, lag, stack.lower, stack.upper);
  result.mse_threshold_reached = reached || best->mse <= options.mse_threshold;
  result.degenerate_targets = degenerate;
  result.offline_low_evals = low_evals;
  result.offline_high_evals = high_evals;

  if (report) {
    for (const auto& c : candidates) {
      if (c.variant == SurrogateVariant::nargp) report->nargp_mse = c.mse;
      if (c.variant == SurrogateVariant::gpdf) report->gpdf_mse = c.mse;
    }
    report->high_design_size = static_cast<int>(high_theta.rows());
    report->points_added = added;
    report->low_evals = low_evals;
    report->high_evals = high_evals;
  }
  return result;
}

nlohmann::json surrogate_to_json(const MfSurrogate& s) {
  nlohmann::json j;
  j["format"] = "mfnuts-surrogate-v1";
  j["variant"] = to_string(s.variant);
  j["lower"] = std::vector<double>(s.lower.begin(), s.lower.end());
  j["upper"] = std::vector<double>(s.upper.begin(), s.upper.end());
  j["lag"] = std::vector<double>(s.lag.begin(), s.lag.end());
  j["validation_mse"] = s.validation_mse;
  j["mse_threshold_reached"] = s.mse_threshold_reached;
  j["degenerate_targets"] = s.degenerate_targets;
  j["offline_low_evals"] = s.offline_low_evals;
  j["offline_high_evals"] = s.offline_high_evals;
  j["low_gp"] = gp_to_json(s.low_gp);
  j["high_gp"] = gp_to_json(s.high_gp);
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(s.high_theta.rows()));
  for (Eigen::Index i = 0; i < s.high_theta.rows(); ++i)
    rows[static_cast<std::size_t>(i)].assign(s.high_theta.row(i).begin(), s.high_theta.row(i).end());
  j["high_theta"] = rows;
  return j;
}

MfSurrogate surrogate_from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != "mfnuts-surrogate-v1")
    throw std::invalid_argument("surrogate_from_json: unsupported format");
  MfSurrogate s;
  s.variant = surrogate_variant_from_string(j.at("variant").get<std::string>());
  auto lower = j.at("lower").get<std::vector<double>>();
  auto upper = j.at("upper").get<std::vector<double>>();
  auto lag = j.at("lag").get<std::vector<double>>();
  s.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size()));
  s.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size()));
  s.lag = Eigen::Map<const Eigen::VectorXd>(lag.data(), static_cast<Eigen::Index>(lag.size()));
  s.validation_mse = j.at("validation_mse").get<double>();
  s.mse_threshold_reached = j.at("mse_threshold_reached").get<bool>();
  s.degenerate_targets = j.at("degenerate_targets").get<bool>();
  s.offline_low_evals = j.at("offline_low_evals").get<long long>();
  s.offline_high_evals = j.at("offline_high_evals").get<long long>();
  s.low_gp = gp_from_json(j.at("low_gp"));
  s.high_gp = gp_from_json(j.at("high_gp"));
  auto rows = j.at("high_theta").get<std::vector<std::vector<double>>>();
  s.high_theta.resize(static_cast<Eigen::Index>(rows.size()), s.lower.size());
  for (Eigen::Index i = 0; i < s.high_theta.rows(); ++i)
    s.high_theta.row(i) = Eigen::Map<const Eigen::VectorXd>(rows[static_cast<std::size_t>(i)].data(),
                                                            s.lower.size());
  return s;
}

void save_surrogate(const MfSurrogate& surrogate, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_surrogate: cannot open '" + path + "'");
  out << surrogate_to_json(surrogate).dump(1) << '\n';
}

MfSurrogate load_surrogate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_surrogate: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return surrogate_from_json(j);
}

}  // namespace mfnuts
