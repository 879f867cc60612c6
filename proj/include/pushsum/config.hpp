#pragma once

#include "pushsum/energy.hpp"
#include "pushsum/engine.hpp"
#include "pushsum/oracle.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pushsum {

inline constexpr int kConfigVersion = 1;

/// Constant-parameter penalized descent used as the centralized reference.
struct CentralizedSettings {
  Round rounds = 100000;
  double step = 1e-3;
  double penalty = 100.0;
};

struct OracleSettings {
  int grid = 41;
  int refine = 8;
  double penalty = 1e6;
  std::optional<std::vector<oracle::Interval>> box;
  /// When absent, the run's own schedule is replayed with steps divided by
  /// the agent count, which mirrors the average dynamics of the network.
  std::optional<CentralizedSettings> centralized;
  /// Absolute slack added to 10x the brute-force grid resolution when the
  /// two oracles are compared.
  double agreement_tol = 1e-2;
  std::vector<double> path_r{1.0, 10.0, 100.0, 1000.0};
};

/// A fully validated experiment. RunConfig references nothing outside this
/// object, but Engine holds a reference to `run`, so keep the config alive
/// for as long as any engine built from it.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string problem_type;  // "energy", "quadratic" or "toy"
  std::optional<energy::EnergyInstance> energy;
  std::vector<Vector> targets;  // quadratic: one centre per agent
  RunConfig run;
  OracleSettings oracle;
  nlohmann::json source;  // the parsed document, with the effective seed
};

/// Parses and validates a config document. `seed_override` replaces the
/// top-level seed before anything random is drawn. Throws ValidationError.
ExperimentConfig parse_config(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = {});

/// Reads and parses a JSON file; a missing or malformed file is a ValidationError.
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});

/// Builds a GraphSchedule from the "graph" section.
GraphSchedule parse_graph(const nlohmann::json& j, std::uint64_t default_seed);

/// Builds a ParamSchedule from the "schedule" section.
ParamSchedule parse_schedule(const nlohmann::json& j);

/// Local problems for the quadratic consensus family F_i(z) = ||z - c_i||^2.
std::vector<PenalizedProblem> quadratic_problems(const std::vector<Vector>& targets);

/// The shared-constraint toy: F_i(z) = z^2 / n and every agent holds 1 - z <= 0.
std::vector<PenalizedProblem> toy_problems(int agents);

}  // namespace pushsum
