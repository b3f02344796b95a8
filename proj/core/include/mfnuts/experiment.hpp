#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfnuts/diagnostics.hpp"
#include "mfnuts/samplers.hpp"
#include "mfnuts/surrogate.hpp"

namespace mfnuts {

// Invalid configuration; the message carries "<origin>:<line>:" context.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SurrogateConfig {
  int n_low = 0;   // 0: problem default
  int n_high = 0;  // 0: problem default
  int n_test = 200;
  double mse_threshold = 1e-3;
  std::string variant = "auto";  // auto | nargp | gpdf
  std::string path;              // optional save/load location
};

struct SamplerParams {
  double proposal_scale = 0.0;  // 0: 2.4 / sqrt(d)
  int hmc_T = 10;
  int max_tree_depth = 10;
  double delta = 0.65;
};

struct ExperimentConfig {
  std::string problem;
  std::string sampler;  // mh | hmc | nuts | mfnuts
  int m_adapt = 2000;
  int m_samples = 10000;
  int n_chains = 1;
  std::uint64_t seed = 0;
  SurrogateConfig surrogate;
  SamplerParams sampler_params;
  std::string output_dir;
};

// Strict JSON parsing: unknown fields are rejected with a line-numbered
// ConfigError. `origin` names the source in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin);
ExperimentConfig load_config_file(const std::string& path);

// MFNUTS_SEED, when set, overrides the config seed.
void apply_env_seed_override(ExperimentConfig& config);

// problem-specific default (n_low, n_high) budgets
std::pair<int, int> default_budgets(const std::string& problem);

struct RunArtifacts {
  ProblemSpec problem;
  std::vector<ChainRecord> chains;
  std::vector<MetricsReport> metrics;
  MfSurrogate surrogate;  // valid when has_surrogate
  bool has_surrogate = false;
};

// Runs the configured experiment in memory: builds or loads the surrogate for
// mfnuts, then executes n_chains chains concurrently with per-chain seeds
// seed + chain_index.
RunArtifacts execute_experiment(const ExperimentConfig& config);

// execute + write artifacts (per-chain samples CSV, metrics.json, curve.csv)
// into output_dir. Returns 0 on success; 1 on a runtime failure, leaving
// partial outputs plus a MANIFEST noting the incompleteness.
int run_experiment(const ExperimentConfig& config);

// parse + validate + run; configuration problems exit 2
int run_experiment_file(const std::string& config_path);

// Runs every config (all must target the same problem) and concatenates
// their mESS-versus-cost curves into one CSV with columns
// sampler,hf_evals,mess.
int compare_command(const std::vector<std::string>& config_paths, const std::string& out_path);

// builds the mfnuts surrogate and saves it to surrogate.path without sampling
int build_surrogate_command(const std::string& config_path);

// builds (or loads, when config.surrogate.path exists) the surrogate for a
// problem stack according to the config
MfSurrogate prepare_surrogate(const ExperimentConfig& config, const ProblemSpec& problem);

// round-trippable float formatting used by every CSV writer
std::string format_double(double v);

}  // namespace mfnuts
