// stochex <command> --config <file> [--out <csv>] [--check] [--threads N]

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "config.hpp"
#include "experiments.hpp"

int main(int argc, char** argv) {
  using namespace stochex::cli;

  CLI::App app{"stochex experiment runner"};
  std::string command;
  std::string config_path;
  std::string out_path;
  bool check = false;
  int threads = 0;
  app.add_option("command", command, "exp-verify | solve | reduce | converge")
      ->required()
      ->check(CLI::IsMember({"exp-verify", "solve", "reduce", "converge"}));
  app.add_option("--config", config_path, "experiment config (YAML)")->required();
  app.add_option("--out", out_path, "CSV output path (default: stdout)");
  app.add_flag("--check", check, "exit 4 if an acceptance threshold fails");
  app.add_option("--threads", threads, "worker threads (overrides STOCHEX_THREADS)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (command_name(cfg.command) != command)
      throw ConfigError("config declares command '" + command_name(cfg.command) + "' but '" + command +
                        "' was requested");
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kConfigError;
  }

  RunOptions opts;
  opts.check = check;
  opts.threads = resolve_threads(threads > 0 ? std::optional<int>(threads) : std::nullopt, cfg);

  RunResult result;
  try {
    result = run_experiment(cfg, opts);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid experiment: " << e.what() << "\n";
    return kConfigError;
  } catch (const stochex::NumericalError& e) {
    std::cerr << "numerical rejection: " << e.what() << "\n";
    return kNumericalRejection;
  }

  const auto csv = to_csv(cfg, result.rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return kConfigError;
    }
    out << csv;
  }
  for (const auto& m : result.messages) std::cerr << m << "\n";
  return result.exit_code;
}
