#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace stochex::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalRejection = 3, kCheckFailed = 4 };

// One CSV line. row is "seed", "rms" or "order".
struct ReportRow {
  std::string row;
  std::string method;
  std::optional<long> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> sup_residual;
  std::optional<double> cross_method_gap;
  std::optional<double> invertibility_margin;
  long flagged_blowups = 0;
  std::optional<double> wall_time_ms;
  std::string note;
  double scale = 0.0;  // magnitude of the compared objects; not emitted
};

struct RunOptions {
  bool check = false;
  int threads = 1;
};

struct RunResult {
  std::vector<ReportRow> rows;
  int exit_code = kOk;
  std::vector<std::string> messages;  // human-readable, for stderr
};

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

// Per-command entry points; all dispatch through run_experiment.
RunResult run_exp_verify(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_solve(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_reduce(const ExperimentConfig& cfg, const RunOptions& opts);
RunResult run_converge(const ExperimentConfig& cfg, const RunOptions& opts);

inline constexpr const char* kCsvHeader =
    "config_hash,experiment,row,method,steps,seed,sup_residual,cross_method_gap,invertibility_margin,"
    "flagged_blowups,wall_time_ms,note";

// RFC 4180 text with header; floats with 17 significant digits.
std::string to_csv(const ExperimentConfig& cfg, const std::vector<ReportRow>& rows, bool include_wall_time = true);

// Thread count from --threads, else STOCHEX_THREADS, else the config, else 1.
int resolve_threads(std::optional<int> flag, const ExperimentConfig& cfg);

}  // namespace stochex::cli
