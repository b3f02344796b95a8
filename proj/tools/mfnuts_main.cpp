#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfnuts/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-fidelity No-U-Turn sampling experiments"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("--config", run_config, "Path to the experiment config")->required();

  std::vector<std::string> compare_configs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Run several configs on one problem and merge their mESS curves");
  compare->add_option("--configs", compare_configs, "Config paths")->required()->expected(-1);
  compare->add_option("--out", compare_out, "Output CSV path")->required();

  std::string build_config;
  auto* build = app.add_subcommand("build-surrogate", "Build and save the surrogate without sampling");
  build->add_option("--config", build_config, "Path to the experiment config")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return mfnuts::run_experiment_file(run_config);
  if (compare->parsed()) return mfnuts::compare_command(compare_configs, compare_out);
  if (build->parsed()) return mfnuts::build_surrogate_command(build_config);
  return 2;
}
