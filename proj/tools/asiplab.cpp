// asiplab: run experiments on the random skew-product model and replay
// stored reports.
//
//   asiplab run <subcommand> [--config PATH] [--out DIR] [--seed U64]
//                            [--threads INT] [--set KEY=VALUE]...
//   asiplab replay <report.json | report dir> [--threads INT]
//   asiplab config [--config PATH] [--set KEY=VALUE]...
//
// Exit codes: 0 success, 2 contract violation or replay divergence,
// 1 operational error.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asiplab/config.hpp"
#include "asiplab/experiments.hpp"
#include "asiplab/parallel.hpp"

namespace {

std::string default_out_root() {
  const char* env = std::getenv("ASIPLAB_OUT_ROOT");
  return env && *env ? env : "asiplab-out";
}

asiplab::ExperimentConfig resolve(const std::string& config_path,
                                  const std::vector<std::string>& overrides,
                                  const std::optional<std::uint64_t>& seed) {
  asiplab::ExperimentConfig cfg =
      config_path.empty() ? asiplab::ExperimentConfig{} : asiplab::load_config(config_path);
  for (const auto& o : overrides) asiplab::apply_override(cfg, o);
  if (seed) cfg.statistics.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asiplab: limit-theorem experiments for random expanding maps"};
  app.require_subcommand(1);

  std::string sub;
  std::string config_path;
  std::string out_root = default_out_root();
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> overrides;
  std::string replay_path;

  auto* run = app.add_subcommand("run", "run an experiment and write its report");
  run->add_option("subcommand", sub, "experiment")
      ->required()
      ->check(CLI::IsMember(asiplab::subcommands()));
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--out", out_root, "output root (default $ASIPLAB_OUT_ROOT or ./asiplab-out)");
  run->add_option("--seed", seed, "master seed, overrides the config");
  run->add_option("--threads", threads, "worker thread cap (0: all cores)");
  run->add_option("--set", overrides, "dotted-path override KEY=VALUE")->take_all();

  auto* replay = app.add_subcommand("replay", "rerun a stored report and compare");
  replay->add_option("report", replay_path, "report.json or its directory")->required();
  replay->add_option("--threads", threads, "worker thread cap (0: all cores)");

  auto* config = app.add_subcommand("config", "print the resolved config");
  config->add_option("--config", config_path, "JSON config file");
  config->add_option("--set", overrides, "dotted-path override KEY=VALUE")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    asiplab::set_thread_cap(threads);
    if (*config) {
      std::cout << asiplab::to_json_text(resolve(config_path, overrides, std::nullopt)) << '\n';
      return 0;
    }
    if (*replay) {
      const auto outcome = asiplab::replay_report(replay_path);
      (outcome.exit_code == 0 ? std::cout : std::cerr) << outcome.message << '\n';
      return outcome.exit_code;
    }
    const auto cfg = resolve(config_path, overrides, seed);
    const auto report = asiplab::run_experiment(sub, cfg);
    const std::string dir = asiplab::write_report(report, cfg, out_root);
    std::cout << dir << '\n';
    for (const auto& v : report.violations) std::cerr << "contract violation: " << v << '\n';
    return report.contract_ok ? 0 : 2;
  } catch (const asiplab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
