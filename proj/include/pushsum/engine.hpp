#pragma once

#include "pushsum/netgraph.hpp"
#include "pushsum/penalty.hpp"
#include "pushsum/schedules.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pushsum {

/// Per-agent push-sum variables.
struct AgentState {
  Vector x;
  Vector w;
  double y = 1.0;
  Vector z;
};

struct RunConfig {
  std::vector<PenalizedProblem> problems;  // one per agent
  GraphSchedule schedule;
  ParamSchedule params;
  std::vector<Vector> x0;  // empty: every agent starts at the zero vector
  Round max_rounds = 30000;
  Round record_every = 1;
  std::optional<double> stop_tolerance;
  /// Use w_i(t) instead of w_i(t+1) in the descent step, as the update is
  /// sometimes printed. Breaks the average dynamics; for comparison only.
  bool descend_from_stale_w = false;
  /// When false the walltime column is written as 0 so output is reproducible.
  bool record_walltime = false;
  bool trace_agents = false;
  /// Upper bound on worker threads used for per-agent gradient evaluation.
  unsigned threads = 1;
};

struct MetricsRow {
  Round round = 0;
  double disagreement = 0.0;  // max_i ||z_i - mean(z)||
  double mean_penalty = 0.0;  // Psi(x_bar) / n
  double objective = 0.0;     // F(x_bar)
  double walltime_ms = 0.0;
  Vector avg_iterate;         // x_bar
};

struct AgentTraceRow {
  Round round = 0;
  int agent = 0;
  double y = 0.0;
  Vector z;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
  std::vector<AgentTraceRow> trace;
  std::vector<AgentState> final_agents;
  Round rounds_completed = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

struct MassInvariants {
  double sum_y = 0.0;
  Vector sum_x;
};

/// Lockstep simulator of the penalized push-sum iteration. Holds a reference
/// to its RunConfig, which must outlive it.
class Engine {
 public:
  explicit Engine(const RunConfig& cfg);

  /// Advances from round t = round() to t + 1.
  void step();

  Round round() const { return round_; }
  int agent_count() const { return static_cast<int>(agents_.size()); }
  const std::vector<AgentState>& agents() const { return agents_; }
  /// f_i(z_i) + r_t psi_i(z_i) evaluated during the last step, per agent.
  const std::vector<Vector>& last_gradients() const { return gradients_; }
  double last_step_size() const { return last_step_size_; }

  MassInvariants mass_invariants() const;
  Vector average_x() const;
  Vector average_z() const;
  double disagreement() const;
  double mean_penalty() const;
  double objective() const;
  MetricsRow snapshot(double walltime_ms) const;

 private:
  const RunConfig& cfg_;
  std::vector<AgentState> agents_;
  std::vector<Vector> gradients_;
  std::vector<Vector> next_w_;
  std::vector<double> next_y_;
  Round round_ = 0;
  double last_step_size_ = 0.0;
};

/// Validates cfg and returns an engine at round 0 (y = 1, x = w = z = x0).
Engine init_run(const RunConfig& cfg);

/// Runs until max_rounds, or until both disagreement and mean_penalty drop
/// below stop_tolerance. Rows are recorded every record_every rounds and at
/// the final round.
RunMetrics run(const RunConfig& cfg);

}  // namespace pushsum
