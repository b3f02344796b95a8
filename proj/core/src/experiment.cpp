#include "mfnuts/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mfnuts/design.hpp"

namespace mfnuts {

namespace fs = std::filesystem;

namespace {

int line_of_key(const std::string& text, const std::string& key) {
  auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 1;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known,
                    const std::string& text, const std::string& origin, const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key))
      fail(origin, line_of_key(text, key),
           "unknown field '" + key + "'" + (scope.empty() ? "" : " in " + scope));
  }
}

ChainRecord run_chain(const ExperimentConfig& config, const ProblemSpec& problem,
                      const MfSurrogate* surrogate, int chain_index) {
  const std::uint64_t chain_seed = config.seed + static_cast<std::uint64_t>(chain_index);
  RandomStream init_rng(mix_seed(chain_seed, 7));
  Eigen::MatrixXd start = uniform_box(1, problem.stack.lower, problem.stack.upper, init_rng);
  Eigen::VectorXd theta0 = start.row(0);

  SamplerSettings settings;
  settings.proposal_scale = config.sampler_params.proposal_scale;
  settings.hmc_steps = config.sampler_params.hmc_T;
  settings.max_tree_depth = config.sampler_params.max_tree_depth;
  settings.delta = config.sampler_params.delta;

  if (config.sampler == "mh")
    return run_mh(problem.stack.high(), theta0, config.m_adapt, config.m_samples, settings,
                  chain_seed);
  if (config.sampler == "hmc")
    return run_hmc(problem.stack.high(), theta0, config.m_adapt, config.m_samples, settings,
                   chain_seed);
  if (config.sampler == "nuts")
    return run_nuts(problem.stack.high(), theta0, config.m_adapt, config.m_samples, settings,
                    chain_seed);
  if (config.sampler == "mfnuts")
    return run_mfnuts(*surrogate, problem.stack.high(), theta0, config.m_adapt, config.m_samples,
                      settings, chain_seed);
  throw std::invalid_argument("unknown sampler '" + config.sampler + "'");
}

void write_samples_csv(const ChainRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const Eigen::Index d = rec.dimension();
  out << "index";
  for (Eigen::Index j = 0; j < d; ++j) out << ",theta_" << j;
  out << ",log_density,accepted,hf_evals_cumulative\n";
  for (Eigen::Index i = 0; i < rec.size(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(rec.samples(i, j));
    out << ',' << format_double(rec.logp[i]) << ','
        << static_cast<int>(rec.accepted[static_cast<std::size_t>(i)]) << ','
        << rec.hf_evals_cumulative[static_cast<std::size_t>(i)] << '\n';
  }
}

void write_curve_csv(const RunArtifacts& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "hf_evals,mess\n";
  for (const auto& metric : result.metrics)
    for (const auto& [x, y] : metric.curve) out << x << ',' << format_double(y) << '\n';
}

void write_metrics_json(const ExperimentConfig& config, const RunArtifacts& result,
                        const std::string& path) {
  nlohmann::json j;
  j["problem"] = config.problem;
  j["sampler"] = config.sampler;
  j["seed"] = config.seed;
  j["m_adapt"] = config.m_adapt;
  j["m_samples"] = config.m_samples;
  j["n_chains"] = config.n_chains;
  nlohmann::json chains = nlohmann::json::array();
  for (std::size_t c = 0; c < result.metrics.size(); ++c) {
    nlohmann::json jc = metrics_to_json(result.metrics[c]);
    jc["chain"] = c;
    jc["step_size"] = result.chains[c].step_size;
    jc["offline_hf_evals"] = result.chains[c].offline_hf_evals;
    jc["adapt_hf_evals"] = result.chains[c].adapt_hf_evals;
    jc["divergences"] = result.chains[c].divergences;
    jc["depth_saturations"] = result.chains[c].depth_saturations;
    jc["extrapolated_proposals"] = result.chains[c].extrapolated_proposals;
    chains.push_back(std::move(jc));
  }
  j["chains"] = std::move(chains);
  j["hf_evals_counter"] = result.problem.stack.high().call_count();
  if (result.has_surrogate) {
    j["surrogate"] = {{"variant", to_string(result.surrogate.variant)},
                      {"validation_mse", result.surrogate.validation_mse},
                      {"mse_threshold_reached", result.surrogate.mse_threshold_reached},
                      {"offline_low_evals", result.surrogate.offline_low_evals},
                      {"offline_hf_evals", result.surrogate.offline_high_evals}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::pair<int, int> default_budgets(const std::string& problem) {
  if (problem == "rosenbrock") return {200, 50};
  if (problem == "gaussian8d") return {500, 100};
  if (problem == "groundwater") return {450, 70};
  return {200, 50};
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(std::min(e.byte, text.size())), '\n'));
    fail(origin, line, std::string("JSON parse error: ") + e.what());
  }
  if (!j.is_object()) fail(origin, 1, "config must be a JSON object");

  reject_unknown(j,
                 {"problem", "sampler", "m_adapt", "m_samples", "n_chains", "seed", "surrogate",
                  "sampler_params", "output_dir"},
                 text, origin, "");

  ExperimentConfig c;
  auto get_to = [&](const nlohmann::json& obj, const char* key, auto& target) {
    if (!obj.contains(key)) return;
    try {
      obj.at(key).get_to(target);
    } catch (const nlohmann::json::exception& e) {
      fail(origin, line_of_key(text, key), std::string("bad value for '") + key + "': " + e.what());
    }
  };

  get_to(j, "problem", c.problem);
  get_to(j, "sampler", c.sampler);
  get_to(j, "m_adapt", c.m_adapt);
  get_to(j, "m_samples", c.m_samples);
  get_to(j, "n_chains", c.n_chains);
  get_to(j, "seed", c.seed);
  get_to(j, "output_dir", c.output_dir);

  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    reject_unknown(s, {"n_low", "n_high", "n_test", "mse_threshold", "variant", "path"}, text,
                   origin, "surrogate");
    get_to(s, "n_low", c.surrogate.n_low);
    get_to(s, "n_high", c.surrogate.n_high);
    get_to(s, "n_test", c.surrogate.n_test);
    get_to(s, "mse_threshold", c.surrogate.mse_threshold);
    get_to(s, "variant", c.surrogate.variant);
    get_to(s, "path", c.surrogate.path);
  }
  if (j.contains("sampler_params")) {
    const auto& p = j.at("sampler_params");
    reject_unknown(p, {"proposal_scale", "hmc_T", "max_tree_depth", "delta"}, text, origin,
                   "sampler_params");
    get_to(p, "proposal_scale", c.sampler_params.proposal_scale);
    get_to(p, "hmc_T", c.sampler_params.hmc_T);
    get_to(p, "max_tree_depth", c.sampler_params.max_tree_depth);
    get_to(p, "delta", c.sampler_params.delta);
  }

  if (c.problem != "rosenbrock" && c.problem != "gaussian8d" && c.problem != "groundwater")
    fail(origin, line_of_key(text, "problem"), "unknown problem '" + c.problem + "'");
  if (c.sampler != "mh" && c.sampler != "hmc" && c.sampler != "nuts" && c.sampler != "mfnuts")
    fail(origin, line_of_key(text, "sampler"), "unknown sampler '" + c.sampler + "'");
  if ((c.sampler == "hmc" || c.sampler == "nuts") && c.problem == "groundwater")
    fail(origin, line_of_key(text, "sampler"),
         "sampler '" + c.sampler + "' needs gradients; the groundwater forward model has none");
  if (c.m_samples < 1) fail(origin, line_of_key(text, "m_samples"), "m_samples must be >= 1");
  if (c.m_adapt < 0) fail(origin, line_of_key(text, "m_adapt"), "m_adapt must be >= 0");
  if (c.n_chains < 1) fail(origin, line_of_key(text, "n_chains"), "n_chains must be >= 1");
  if (c.surrogate.variant != "auto" && c.surrogate.variant != "nargp" &&
      c.surrogate.variant != "gpdf")
    fail(origin, line_of_key(text, "variant"),
         "surrogate variant must be auto, nargp, or gpdf");
  if (c.sampler_params.delta <= 0.0 || c.sampler_params.delta >= 1.0)
    fail(origin, line_of_key(text, "delta"), "delta must lie in (0, 1)");

  auto [def_low, def_high] = default_budgets(c.problem);
  if (c.surrogate.n_low == 0) c.surrogate.n_low = def_low;
  if (c.surrogate.n_high == 0) c.surrogate.n_high = def_high;
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ":1: cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

void apply_env_seed_override(ExperimentConfig& config) {
  if (const char* env = std::getenv("MFNUTS_SEED")) config.seed = std::strtoull(env, nullptr, 10);
}

MfSurrogate prepare_surrogate(const ExperimentConfig& config, const ProblemSpec& problem) {
  if (!config.surrogate.path.empty() && fs::exists(config.surrogate.path)) {
    MfSurrogate s = load_surrogate(config.surrogate.path);
    if (s.dimension() != problem.dimension)
      throw std::runtime_error("loaded surrogate dimension does not match problem '" +
                               problem.name + "'");
    return s;
  }
  SurrogateBuildOptions opts;
  opts.n_low = config.surrogate.n_low;
  opts.n_high = config.surrogate.n_high;
  opts.n_test = config.surrogate.n_test;
  opts.mse_threshold = config.surrogate.mse_threshold;
  opts.seed = mix_seed(config.seed, 11);
  opts.train_nargp = config.surrogate.variant != "gpdf";
  opts.train_gpdf = config.surrogate.variant != "nargp";
  MfSurrogate s = build_mfgp(problem.stack, opts);
  if (!config.surrogate.path.empty()) save_surrogate(s, config.surrogate.path);
  return s;
}

RunArtifacts execute_experiment(const ExperimentConfig& config) {
  RunArtifacts result;
  result.problem = make_problem(config.problem);
  if (config.sampler == "mfnuts") {
    result.surrogate = prepare_surrogate(config, result.problem);
    result.has_surrogate = true;
  }

  result.chains.resize(static_cast<std::size_t>(config.n_chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.n_chains));
  auto worker = [&](int k) {
    try {
      result.chains[static_cast<std::size_t>(k)] =
          run_chain(config, result.problem, result.has_surrogate ? &result.surrogate : nullptr, k);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  };
  if (config.n_chains == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(config.n_chains));
    for (int k = 0; k < config.n_chains; ++k) threads.emplace_back(worker, k);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& chain : result.chains) result.metrics.push_back(summary(chain));
  return result;
}

int run_experiment(const ExperimentConfig& config) {
  if (config.output_dir.empty()) {
    std::cerr << "run: output_dir is required\n";
    return 2;
  }
  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);
  try {
    RunArtifacts result = execute_experiment(config);
    for (std::size_t c = 0; c < result.chains.size(); ++c)
      write_samples_csv(result.chains[c],
                        (dir / ("chain_" + std::to_string(c) + "_samples.csv")).string());
    write_curve_csv(result, (dir / "curve.csv").string());
    write_metrics_json(config, result, (dir / "metrics.json").string());
    return 0;
  } catch (const std::exception& e) {
    std::ofstream manifest(dir / "MANIFEST");
    manifest << "status: incomplete\n";
    manifest << "error: " << e.what() << '\n';
    std::cerr << "run failed: " << e.what() << '\n';
    return 1;
  }
}

int run_experiment_file(const std::string& config_path) {
  ExperimentConfig config;
  try {
    config = load_config_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  apply_env_seed_override(config);
  return run_experiment(config);
}

int compare_command(const std::vector<std::string>& config_paths, const std::string& out_path) {
  std::vector<ExperimentConfig> configs;
  try {
    for (const auto& path : config_paths) {
      configs.push_back(load_config_file(path));
      apply_env_seed_override(configs.back());
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  if (configs.empty()) {
    std::cerr << "compare: no configs given\n";
    return 2;
  }
  for (const auto& c : configs) {
    if (c.problem != configs.front().problem) {
      std::cerr << "compare: configs target different problems ('" << configs.front().problem
                << "' vs '" << c.problem << "')\n";
      return 2;
    }
  }
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "compare: cannot open '" << out_path << "'\n";
    return 1;
  }
  out << "sampler,hf_evals,mess\n";
  try {
    for (const auto& config : configs) {
      RunArtifacts result = execute_experiment(config);
      for (const auto& metric : result.metrics)
        for (const auto& [x, y] : metric.curve)
          out << config.sampler << ',' << x << ',' << format_double(y) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "compare failed: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int build_surrogate_command(const std::string& config_path) {
  ExperimentConfig config;
  try {
    config = load_config_file(config_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  apply_env_seed_override(config);
  if (config.surrogate.path.empty()) {
    std::cerr << config_path << ":1: build-surrogate requires surrogate.path\n";
    return 2;
  }
  try {
    ProblemSpec problem = make_problem(config.problem);
    SurrogateBuildOptions opts;
    opts.n_low = config.surrogate.n_low;
    opts.n_high = config.surrogate.n_high;
    opts.n_test = config.surrogate.n_test;
    opts.mse_threshold = config.surrogate.mse_threshold;
    opts.seed = mix_seed(config.seed, 11);
    opts.train_nargp = config.surrogate.variant != "gpdf";
    opts.train_gpdf = config.surrogate.variant != "nargp";
    SurrogateBuildReport report;
    MfSurrogate s = build_mfgp(problem.stack, opts, &report);
    save_surrogate(s, config.surrogate.path);
    std::cout << "surrogate: variant=" << to_string(s.variant)
              << " validation_mse=" << s.validation_mse
              << " high_evals=" << s.offline_high_evals << " low_evals=" << s.offline_low_evals
              << " saved to " << config.surrogate.path << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "build-surrogate failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mfnuts
