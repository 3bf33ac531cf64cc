// breglab run <config> [--seed N] [--out PATH] [--override key=value]...
//
// Exit codes: 0 all asserted checks pass, 1 a check failed, 2 configuration
// or domain error, 3 more than 1% of grid points did not converge.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "breglab/config.hpp"
#include "breglab/experiments.hpp"

namespace {

int run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
        const std::optional<std::string>& out_path, const std::vector<std::string>& overrides) {
  using namespace breglab;
  ExperimentOutcome outcome;
  std::string csv_path;
  std::string plot_path;
  try {
    ExperimentConfig cfg = load_config(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    if (seed) cfg.apply_override("seed=" + std::to_string(*seed));
    if (out_path) cfg.apply_override("out=" + *out_path);
    csv_path = cfg.text("out", cfg.experiment + ".csv");
    plot_path = cfg.text("plot", "");
    outcome = run_experiment(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return 2;
  }

  write_csv_file(csv_path, outcome.records);
  if (!plot_path.empty()) {
    std::ofstream plot(plot_path);
    if (!plot) throw std::runtime_error("cannot write " + plot_path);
    plot << plot_script(csv_path, outcome.experiment);
  }
  std::cout << report(outcome);
  std::cout << "csv: " << csv_path << '\n';

  if (outcome.nonconverged_fraction() > 0.01) return 3;
  return outcome.checks_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tikhonov regularization experiments"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  std::vector<std::string> overrides;
  run_cmd->add_option("config", config_path, "configuration file")->required();
  run_cmd->add_option("--seed", seed, "base seed for noise draws");
  run_cmd->add_option("--out", out_path, "CSV output path");
  run_cmd->add_option("--override", overrides, "key=value replacing a config entry")
      ->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(config_path, seed, out_path, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
