#include "mfnuts/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace mfnuts {

namespace {

bool metropolis_accept(double log_alpha, RandomStream& rng) {
  if (log_alpha >= 0.0) return true;
  return rng.uniform() < std::exp(log_alpha);
}

void init_record(ChainRecord& rec, int m_samples, Eigen::Index d, bool with_depth) {
  rec.samples.resize(m_samples, d);
  rec.logp.resize(m_samples);
  rec.accepted.assign(static_cast<std::size_t>(m_samples), 0);
  if (with_depth) rec.tree_depth.assign(static_cast<std::size_t>(m_samples), 0);
  rec.hf_evals_cumulative.assign(static_cast<std::size_t>(m_samples), 0);
}

double resolve_scale(double proposal_scale, Eigen::Index d) {
  return proposal_scale > 0.0 ? proposal_scale : 2.4 / std::sqrt(static_cast<double>(d));
}

}  // namespace

MhStepResult mh_step(const Eigen::VectorXd& theta, double logp,
                     const std::function<double(const Eigen::VectorXd&)>& logpdf,
                     double proposal_scale, RandomStream& rng) {
  if (proposal_scale <= 0.0) throw std::invalid_argument("mh_step: proposal_scale must be positive");
  Eigen::VectorXd proposal = theta + proposal_scale * rng.normal_vector(theta.size());
  double logp_prop = logpdf(proposal);
  if (std::isfinite(logp_prop) && metropolis_accept(logp_prop - logp, rng))
    return {std::move(proposal), logp_prop, true};
  return {theta, logp, false};
}

HmcStepResult hmc_step(const PhaseState& current, double eps, int n_steps, const GradTarget& target,
                       RandomStream& rng) {
  if (eps <= 0.0 || n_steps < 1) throw std::invalid_argument("hmc_step: bad eps or step count");
  PhaseState state = current;
  state.r = rng.normal_vector(current.theta.size());
  const double h0 = hamiltonian(state);
  for (int t = 0; t < n_steps; ++t) {
    state = leapfrog(state, eps, target);
    if (!phase_finite(state)) return {current, false, true, 0.0};
  }
  const double h1 = hamiltonian(state);
  if (h1 - h0 > kDivergenceThreshold) return {current, false, true, 0.0};
  const double log_alpha = h0 - h1;
  const double alpha = std::min(1.0, std::exp(log_alpha));
  if (metropolis_accept(log_alpha, rng)) return {std::move(state), true, false, alpha};
  return {current, false, false, alpha};
}

namespace {

struct NutsLeaf {
  PhaseState state;
  double h = 0.0;
};

// whether the segment between two trajectory ends has started doubling back
bool no_uturn(const PhaseState& minus_end, const PhaseState& plus_end) {
  Eigen::VectorXd span = plus_end.theta - minus_end.theta;
  return span.dot(minus_end.r) >= 0.0 && span.dot(plus_end.r) >= 0.0;
}

// A balanced subtree of 2^depth leapfrog states grown in one direction.
// `valid` means no divergence and no u-turn inside any of its sub-segments;
// only then may its slice members enter the candidate set.
struct NutsTreeSegment {
  PhaseState minus_end;  // trajectory-time ordering, independent of direction
  PhaseState plus_end;
  std::vector<NutsLeaf> candidates;
  bool valid = true;
  bool divergent = false;
};

struct NutsTreeScratch {
  double h0 = 0.0;
  double log_u = 0.0;
  double alpha_sum = 0.0;
  long long n_alpha = 0;
};

NutsTreeSegment grow_tree(const PhaseState& from, int direction, int depth, double eps,
                          const GradTarget& target, NutsTreeScratch& scratch) {
  NutsTreeSegment out;
  if (depth == 0) {
    PhaseState next = leapfrog(from, direction * eps, target);
    if (!phase_finite(next)) {
      ++scratch.n_alpha;  // a diverged proposal counts as zero acceptance
      out.valid = false;
      out.divergent = true;
      out.minus_end = from;
      out.plus_end = from;
      return out;
    }
    const double h = hamiltonian(next);
    scratch.alpha_sum += std::min(1.0, std::exp(scratch.h0 - h));
    ++scratch.n_alpha;
    if (-h >= scratch.log_u) out.candidates.push_back({next, h});
    if (h - scratch.h0 > kDivergenceThreshold) {
      out.valid = false;
      out.divergent = true;
    }
    out.minus_end = next;
    out.plus_end = std::move(next);
    return out;
  }

  NutsTreeSegment first = grow_tree(from, direction, depth - 1, eps, target, scratch);
  if (!first.valid) return first;
  const PhaseState& far_end = direction > 0 ? first.plus_end : first.minus_end;
  NutsTreeSegment second = grow_tree(far_end, direction, depth - 1, eps, target, scratch);

  out.minus_end = direction > 0 ? std::move(first.minus_end) : std::move(second.minus_end);
  out.plus_end = direction > 0 ? std::move(second.plus_end) : std::move(first.plus_end);
  out.candidates = std::move(first.candidates);
  out.candidates.insert(out.candidates.end(), std::make_move_iterator(second.candidates.begin()),
                        std::make_move_iterator(second.candidates.end()));
  out.divergent = second.divergent;
  out.valid = second.valid && no_uturn(out.minus_end, out.plus_end);
  return out;
}

}  // namespace

NutsResult nuts_step(const Eigen::VectorXd& theta, double logp, const Eigen::VectorXd& grad,
                     double eps, const GradTarget& target, RandomStream& rng, int max_depth) {
  if (eps <= 0.0) throw std::invalid_argument("nuts_step: eps must be positive");
  const Eigen::Index d = theta.size();

  NutsResult res;
  Eigen::VectorXd r0 = rng.normal_vector(d);
  const double h0 = hamiltonian(logp, r0);

  NutsTreeScratch scratch;
  scratch.h0 = h0;
  // slice variable u = U(0,1] * p(theta, r0), kept in log space
  scratch.log_u = std::log(1.0 - rng.uniform()) - h0;

  std::vector<NutsLeaf> candidates;
  candidates.push_back({PhaseState{theta, r0, logp, grad}, h0});
  PhaseState minus_end = candidates.front().state;
  PhaseState plus_end = candidates.front().state;

  int depth = 0;
  while (depth < max_depth) {
    const int direction = rng.uniform() < 0.5 ? -1 : 1;
    NutsTreeSegment tree = grow_tree(direction > 0 ? plus_end : minus_end, direction, depth, eps,
                                     target, scratch);
    if (direction > 0)
      plus_end = tree.plus_end;
    else
      minus_end = tree.minus_end;
    if (!tree.valid) {
      // a stopped half-tree contributes no candidates
      res.divergent = tree.divergent;
      break;
    }
    candidates.insert(candidates.end(), std::make_move_iterator(tree.candidates.begin()),
                      std::make_move_iterator(tree.candidates.end()));
    ++depth;
    if (!no_uturn(minus_end, plus_end)) break;
    if (depth == max_depth) res.saturated = true;
  }

  const std::size_t pick = rng.uniform_index(candidates.size());
  NutsLeaf& sel = candidates[pick];
  if (!(-sel.h >= scratch.log_u)) throw std::logic_error("nuts_step: selected state left the slice");
  res.theta = std::move(sel.state.theta);
  res.r = std::move(sel.state.r);
  res.logp = sel.state.logp;
  res.grad = std::move(sel.state.grad);
  res.depth = depth;
  res.moved = pick != 0;
  res.alpha_stat = scratch.n_alpha > 0 ? scratch.alpha_sum / static_cast<double>(scratch.n_alpha) : 0.0;
  return res;
}

double da_log_alpha_star(double pi_star_ratio_log, double q_ratio_log) {
  return std::min(0.0, pi_star_ratio_log + q_ratio_log);
}

double da_log_alpha_second(double pi_star_ratio_log, double pi_ratio_log) {
  // The q*/q factors cancel against the two stage-one probabilities:
  // log a*(reverse) - log a*(forward) = -(pi_star_ratio_log + q_ratio_log),
  // which leaves the ratio of target-to-approximation ratios.
  return std::min(0.0, pi_ratio_log - pi_star_ratio_log);
}

double mfnuts_log_alpha(double logps_current, double logps_proposal, double logpi_current,
                        double logpi_proposal) {
  // min{1, ps(cur)/ps(prop)} / min{1, ps(prop)/ps(cur)} = ps(cur)/ps(prop)
  // exactly, so the rule reduces to the ratio of target-to-surrogate
  // mismatches; grouping per position keeps the perfect-surrogate case at
  // exactly zero.
  return std::min(0.0, (logpi_proposal - logps_proposal) - (logpi_current - logps_current));
}

bool da_accept(double pi_star_ratio_log, const std::function<double()>& pi_ratio_log,
               double q_ratio_log, RandomStream& rng) {
  if (!metropolis_accept(da_log_alpha_star(pi_star_ratio_log, q_ratio_log), rng)) return false;
  return metropolis_accept(da_log_alpha_second(pi_star_ratio_log, pi_ratio_log()), rng);
}

bool da_accept(double pi_star_ratio_log, double pi_ratio_log, double q_ratio_log,
               RandomStream& rng) {
  return da_accept(
      pi_star_ratio_log, [&] { return pi_ratio_log; }, q_ratio_log, rng);
}

AdaptationResult adapt_step_size(const GradTarget& target, const Eigen::VectorXd& theta0,
                                 int m_adapt, double delta, int max_depth, RandomStream& rng) {
  AdaptationResult out;
  const double eps0 = find_reasonable_epsilon(theta0, target, rng);
  DualAveragingState da = DualAveragingState::init(eps0, delta);

  auto [logp, grad] = target(theta0);
  out.theta = theta0;
  out.logp = logp;
  out.grad = std::move(grad);
  out.alpha_stats.reserve(static_cast<std::size_t>(m_adapt));
  for (int m = 0; m < m_adapt; ++m) {
    NutsResult res =
        nuts_step(out.theta, out.logp, out.grad, da.current_step(), target, rng, max_depth);
    da = dual_averaging_update(da, res.alpha_stat);
    out.alpha_stats.push_back(res.alpha_stat);
    out.theta = std::move(res.theta);
    out.logp = res.logp;
    out.grad = std::move(res.grad);
  }
  out.step_size = m_adapt > 0 ? da.adapted_step() : eps0;
  return out;
}

ChainRecord run_mh(const Fidelity& target, const Eigen::VectorXd& theta0, int m_adapt,
                   int m_samples, const SamplerSettings& settings, std::uint64_t seed) {
  RandomStream rng(seed);
  const double scale = resolve_scale(settings.proposal_scale, theta0.size());
  long long calls = 0;
  auto logpdf = [&](const Eigen::VectorXd& t) {
    ++calls;
    return target(t);
  };

  Eigen::VectorXd theta = theta0;
  double logp = logpdf(theta);
  for (int m = 0; m < m_adapt; ++m) {
    MhStepResult r = mh_step(theta, logp, logpdf, scale, rng);
    theta = std::move(r.theta);
    logp = r.logp;
  }

  ChainRecord rec;
  init_record(rec, m_samples, theta0.size(), false);
  rec.seed = seed;
  rec.step_size = scale;
  rec.adapt_hf_evals = calls;
  calls = 0;
  for (int i = 0; i < m_samples; ++i) {
    MhStepResult r = mh_step(theta, logp, logpdf, scale, rng);
    theta = std::move(r.theta);
    logp = r.logp;
    rec.samples.row(i) = theta.transpose();
    rec.logp[i] = logp;
    rec.accepted[static_cast<std::size_t>(i)] = r.accepted ? 1 : 0;
    rec.hf_evals_cumulative[static_cast<std::size_t>(i)] = calls;
  }
  return rec;
}

ChainRecord run_hmc(const Fidelity& target, const Eigen::VectorXd& theta0, int m_adapt,
                    int m_samples, const SamplerSettings& settings, std::uint64_t seed) {
  if (!target.has_gradient())
    throw std::invalid_argument("run_hmc: target provides no gradient");
  RandomStream rng(seed);
  long long calls = 0;
  GradTarget t = [&](const Eigen::VectorXd& x) {
    ++calls;
    return target.eval_with_grad(x);
  };

  const double eps0 = find_reasonable_epsilon(theta0, t, rng);
  DualAveragingState da = DualAveragingState::init(eps0, settings.delta);
  auto [logp, grad] = t(theta0);
  PhaseState cur{theta0, Eigen::VectorXd::Zero(theta0.size()), logp, grad};
  for (int m = 0; m < m_adapt; ++m) {
    HmcStepResult r = hmc_step(cur, da.current_step(), settings.hmc_steps, t, rng);
    da = dual_averaging_update(da, r.alpha);
    cur = std::move(r.state);
  }
  const double eps = m_adapt > 0 ? da.adapted_step() : eps0;

  ChainRecord rec;
  init_record(rec, m_samples, theta0.size(), false);
  rec.seed = seed;
  rec.step_size = eps;
  rec.adapt_hf_evals = calls;
  calls = 0;
  for (int i = 0; i < m_samples; ++i) {
    HmcStepResult r = hmc_step(cur, eps, settings.hmc_steps, t, rng);
    cur = std::move(r.state);
    if (r.divergent) ++rec.divergences;
    rec.samples.row(i) = cur.theta.transpose();
    rec.logp[i] = cur.logp;
    rec.accepted[static_cast<std::size_t>(i)] = r.accepted ? 1 : 0;
    rec.hf_evals_cumulative[static_cast<std::size_t>(i)] = calls;
  }
  return rec;
}

ChainRecord run_nuts(const Fidelity& target, const Eigen::VectorXd& theta0, int m_adapt,
                     int m_samples, const SamplerSettings& settings, std::uint64_t seed) {
  if (!target.has_gradient())
    throw std::invalid_argument("run_nuts: target provides no gradient");
  RandomStream rng(seed);
  long long calls = 0;
  GradTarget t = [&](const Eigen::VectorXd& x) {
    ++calls;
    return target.eval_with_grad(x);
  };

  AdaptationResult ad =
      adapt_step_size(t, theta0, m_adapt, settings.delta, settings.max_tree_depth, rng);

  ChainRecord rec;
  init_record(rec, m_samples, theta0.size(), true);
  rec.seed = seed;
  rec.step_size = ad.step_size;
  rec.adapt_hf_evals = calls;
  calls = 0;
  Eigen::VectorXd theta = std::move(ad.theta);
  double logp = ad.logp;
  Eigen::VectorXd grad = std::move(ad.grad);
  for (int i = 0; i < m_samples; ++i) {
    NutsResult res = nuts_step(theta, logp, grad, ad.step_size, t, rng, settings.max_tree_depth);
    if (res.divergent) ++rec.divergences;
    if (res.saturated) ++rec.depth_saturations;
    theta = std::move(res.theta);
    logp = res.logp;
    grad = std::move(res.grad);
    rec.samples.row(i) = theta.transpose();
    rec.logp[i] = logp;
    rec.accepted[static_cast<std::size_t>(i)] = res.moved ? 1 : 0;
    rec.tree_depth[static_cast<std::size_t>(i)] = res.depth;
    rec.hf_evals_cumulative[static_cast<std::size_t>(i)] = calls;
  }
  return rec;
}

ChainRecord run_mfnuts(const MfSurrogate& surrogate, const Fidelity& pi_high,
                       const Eigen::VectorXd& theta0, int m_adapt, int m_samples,
                       const SamplerSettings& settings, std::uint64_t seed) {
  RandomStream rng(seed);
  // Trajectories are confined to the design box: beyond the training data the
  // surrogate mean flattens toward the average target value, which can sit
  // far above the true tail values and strand the chain outside. A zero
  // density at the wall stops tree growth in that direction.
  GradTarget s_target = [&surrogate](const Eigen::VectorXd& t) -> std::pair<double, Eigen::VectorXd> {
    if (!surrogate.in_bounds(t))
      return {-std::numeric_limits<double>::infinity(), Eigen::VectorXd::Zero(t.size())};
    return surrogate.logpdf_and_grad(t);
  };

  // Adaptation touches only the surrogate; the single high-fidelity call that
  // seeds the cache is charged to the adaptation ledger.
  AdaptationResult ad =
      adapt_step_size(s_target, theta0, m_adapt, settings.delta, settings.max_tree_depth, rng);
  double logpi = pi_high(ad.theta);

  ChainRecord rec;
  init_record(rec, m_samples, theta0.size(), true);
  rec.seed = seed;
  rec.step_size = ad.step_size;
  rec.offline_hf_evals = surrogate.offline_high_evals;
  rec.adapt_hf_evals = 1;

  Eigen::VectorXd theta = std::move(ad.theta);
  double logp_s = ad.logp;
  Eigen::VectorXd grad_s = std::move(ad.grad);
  long long hf = 0;
  for (int i = 0; i < m_samples; ++i) {
    NutsResult res =
        nuts_step(theta, logp_s, grad_s, ad.step_size, s_target, rng, settings.max_tree_depth);
    if (res.divergent) ++rec.divergences;
    if (res.saturated) ++rec.depth_saturations;
    bool accepted = false;
    if (res.moved) {
      if (!surrogate.in_bounds(res.theta)) ++rec.extrapolated_proposals;
      const double logpi_prop = pi_high(res.theta);
      ++hf;
      if (std::isfinite(logpi_prop)) {
        accepted =
            metropolis_accept(mfnuts_log_alpha(logp_s, res.logp, logpi, logpi_prop), rng);
      }
      if (accepted) {
        theta = std::move(res.theta);
        logp_s = res.logp;
        grad_s = std::move(res.grad);
        logpi = logpi_prop;
      }
    }
    rec.samples.row(i) = theta.transpose();
    rec.logp[i] = logpi;
    rec.accepted[static_cast<std::size_t>(i)] = accepted ? 1 : 0;
    rec.tree_depth[static_cast<std::size_t>(i)] = res.depth;
    rec.hf_evals_cumulative[static_cast<std::size_t>(i)] = hf;
  }
  return rec;
}

}  // namespace mfnuts
