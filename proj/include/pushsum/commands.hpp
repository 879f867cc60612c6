#pragma once

#include "pushsum/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace pushsum {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out;  // may be empty for `check`
  std::optional<std::uint64_t> seed;
  /// oracle.json whose "solution" drives relative_error.csv in `run`.
  std::optional<std::filesystem::path> oracle_solution;
  std::ostream* report = nullptr;  // stdout in the CLI
  std::ostream* log = nullptr;     // stderr in the CLI
};

int cmd_run(const CommandOptions& opts);
int cmd_oracle(const CommandOptions& opts);
int cmd_check(const CommandOptions& opts);

/// min(configured, PUSHSUM_THREADS) when the variable holds a positive integer.
unsigned effective_threads(unsigned configured);

// Pure builders behind the commands, exposed for tests.

std::string metrics_csv(const RunMetrics& m, int dim);
std::string trace_csv(const RunMetrics& m, int dim);
/// Rows of |x_bar_k - ref_k| / |ref_k| (absolute error where ref_k = 0) over
/// the first `coords` coordinates.
std::string relative_error_csv(const RunMetrics& m, const Vector& reference, int coords,
                               const std::vector<std::string>& names);
nlohmann::json final_json(const ExperimentConfig& cfg, const RunMetrics& m);
/// Runs both oracles (plus KKT checks for energy instances and the penalty
/// path for constrained toys). Throws RuntimeFailure when an oracle fails.
nlohmann::json oracle_report(const ExperimentConfig& cfg);
nlohmann::json check_report(const ExperimentConfig& cfg);

/// Names of the coordinates compared in relative_error.csv.
std::vector<std::string> solution_coordinate_names(const ExperimentConfig& cfg);

}  // namespace pushsum
