#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "mfnuts/dynamics.hpp"
#include "mfnuts/problems.hpp"
#include "mfnuts/random.hpp"
#include "mfnuts/surrogate.hpp"

namespace mfnuts {

// One chain's sampling-phase output. hf_evals_cumulative[i] is the number of
// highest-fidelity evaluations consumed by sampling steps 0..i; offline and
// adaptation costs are kept separately.
struct ChainRecord {
  Eigen::MatrixXd samples;  // M x d
  Eigen::VectorXd logp;     // target log density at each sample
  std::vector<std::uint8_t> accepted;
  std::vector<int> tree_depth;  // NUTS family only, else empty
  std::vector<long long> hf_evals_cumulative;
  long long offline_hf_evals = 0;
  long long adapt_hf_evals = 0;
  std::uint64_t seed = 0;
  double step_size = 0.0;
  long long extrapolated_proposals = 0;  // proposals outside the surrogate box
  long long divergences = 0;
  long long depth_saturations = 0;

  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index dimension() const { return samples.cols(); }
};

struct MhStepResult {
  Eigen::VectorXd theta;
  double logp = 0.0;
  bool accepted = false;
};

// Isotropic Gaussian random-walk proposal accepted by the Metropolis rule in
// log space. `logp` caches logpdf(theta). A non-finite proposal density
// rejects. No uniform draw is consumed when the log ratio is >= 0.
MhStepResult mh_step(const Eigen::VectorXd& theta, double logp,
                     const std::function<double(const Eigen::VectorXd&)>& logpdf,
                     double proposal_scale, RandomStream& rng);

struct HmcStepResult {
  PhaseState state;
  bool accepted = false;
  bool divergent = false;
  double alpha = 0.0;
};

// Momentum resampled, n_steps leapfrog steps, Metropolis correction
// min(1, exp(H0 - H1)). Divergent trajectories reject.
HmcStepResult hmc_step(const PhaseState& current, double eps, int n_steps, const GradTarget& target,
                       RandomStream& rng);

struct NutsResult {
  Eigen::VectorXd theta;
  Eigen::VectorXd r;  // momentum attached to the selected leaf
  double logp = 0.0;
  Eigen::VectorXd grad;
  int depth = 0;
  bool moved = false;
  bool divergent = false;
  bool saturated = false;
  double alpha_stat = 0.0;  // mean Metropolis statistic over tree leaves
};

// One trajectory-tree step: momentum resampled, slice variable drawn, tree
// doubled in a random direction until a U-turn at the outer ends, a
// divergence, or max_depth, then one state drawn uniformly from those inside
// the slice.
NutsResult nuts_step(const Eigen::VectorXd& theta, double logp, const Eigen::VectorXd& grad,
                     double eps, const GradTarget& target, RandomStream& rng, int max_depth = 10);

// Delayed acceptance in log space. Ratios follow the convention
// log f(proposal) - log f(current); q_ratio_log = log q(cur|prop) - log q(prop|cur).
double da_log_alpha_star(double pi_star_ratio_log, double q_ratio_log);
double da_log_alpha_second(double pi_star_ratio_log, double pi_ratio_log);

// log of min{1, [min{1, ps(cur)/ps(prop)} pi(prop)] / [min{1, ps(prop)/ps(cur)} pi(cur)]}
// with ps the surrogate density at the two positions. The trajectory
// proposal's kinetic terms cancel between numerator and denominator (the
// trajectory-tree step is reversible with respect to the surrogate canonical
// density), so the ratio collapses to pi(prop) ps(cur) / (pi(cur) ps(prop)).
double mfnuts_log_alpha(double logps_current, double logps_proposal, double logpi_current,
                        double logpi_proposal);

// Two-stage rule: the exact-target ratio is only evaluated when the
// approximate stage accepts. Stages consume a uniform draw only when their
// log acceptance probability is negative.
bool da_accept(double pi_star_ratio_log, const std::function<double()>& pi_ratio_log,
               double q_ratio_log, RandomStream& rng);
bool da_accept(double pi_star_ratio_log, double pi_ratio_log, double q_ratio_log,
               RandomStream& rng);

struct AdaptationResult {
  double step_size = 0.0;
  Eigen::VectorXd theta;  // chain position when adaptation ended
  double logp = 0.0;
  Eigen::VectorXd grad;
  std::vector<double> alpha_stats;  // realized statistic per adaptation step
};

// FindStepSize: reasonable-epsilon initialization followed by m_adapt
// dual-averaged trajectory-tree steps against `target`.
AdaptationResult adapt_step_size(const GradTarget& target, const Eigen::VectorXd& theta0,
                                 int m_adapt, double delta, int max_depth, RandomStream& rng);

struct SamplerSettings {
  double proposal_scale = 0.0;  // 0: 2.4 / sqrt(d)
  int hmc_steps = 10;
  int max_tree_depth = 10;
  double delta = 0.65;
};

ChainRecord run_mh(const Fidelity& target, const Eigen::VectorXd& theta0, int m_adapt,
                   int m_samples, const SamplerSettings& settings, std::uint64_t seed);
ChainRecord run_hmc(const Fidelity& target, const Eigen::VectorXd& theta0, int m_adapt,
                    int m_samples, const SamplerSettings& settings, std::uint64_t seed);
ChainRecord run_nuts(const Fidelity& target, const Eigen::VectorXd& theta0, int m_adapt,
                     int m_samples, const SamplerSettings& settings, std::uint64_t seed);

// Adaptation runs on the surrogate alone; each sampling step proposes with
// one trajectory-tree step on the surrogate and corrects against the
// highest-fidelity density, spending one new high-fidelity evaluation per
// distinct proposal.
ChainRecord run_mfnuts(const MfSurrogate& surrogate, const Fidelity& pi_high,
                       const Eigen::VectorXd& theta0, int m_adapt, int m_samples,
                       const SamplerSettings& settings, std::uint64_t seed);

}  // namespace mfnuts
