// ringgyro: batch front end for scheme runs and sweeps.
//
//   ringgyro run <config.yaml> [--out DIR] [--seed N] [--threads N]
//   ringgyro validate <config.yaml>
//
// Exit codes: 0 success, 2 parse failure, 3 validation failure,
// 4 non-finite result.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "ringgyro/experiment.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInvalid = 3;
constexpr int kExitNumeric = 4;

int report_invalid(const std::vector<std::string>& diagnostics) {
  for (const auto& d : diagnostics) std::cerr << d << "\n";
  return diagnostics.empty() ? 0 : kExitInvalid;
}

int cmd_validate(const std::string& path) {
  ringgyro::ExperimentConfig config;
  try {
    config = ringgyro::load_experiment(path);
  } catch (const ringgyro::ConfigParseError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitParse;
  }
  const auto diagnostics = ringgyro::validate_experiment(config);
  for (const auto& d : diagnostics) std::cout << d << "\n";
  return diagnostics.empty() ? 0 : kExitInvalid;
}

int cmd_run(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
            unsigned threads) {
  ringgyro::ExperimentConfig config;
  try {
    config = ringgyro::load_experiment(path);
  } catch (const ringgyro::ConfigParseError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitParse;
  }
  if (out) config.out_dir = *out;
  if (seed) config.seed = *seed;
  if (const int rc = report_invalid(ringgyro::validate_experiment(config)); rc != 0) return rc;

  try {
    const auto rows = ringgyro::run_experiment(config, threads);
    const auto artifacts = ringgyro::write_artifacts(config, rows);
    std::cout << "wrote " << artifacts.csv.string() << " (" << rows.size() << " rows)\n";
    if (artifacts.plot) std::cout << "wrote " << artifacts.plot->string() << "\n";
  } catch (const ringgyro::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ringgyro::NoInformationError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ringgyro::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-site ring gyroscope simulator"};
  app.require_subcommand(1);

  std::string run_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", run_path, "YAML experiment config")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--seed", seed, "Random seed (overrides seed)");
  run->add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config file without running it");
  validate->add_option("config", validate_path, "YAML experiment config")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) return cmd_run(run_path, out_dir, seed, threads);
  return cmd_validate(validate_path);
}
