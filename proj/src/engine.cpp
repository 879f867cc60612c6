#include "pushsum/engine.hpp"

#include "pushsum/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace pushsum {

namespace {

void validate(const RunConfig& cfg) {
  if (cfg.problems.empty()) throw ValidationError("run needs at least one agent problem");
  const int d = cfg.problems.front().dim();
  for (const auto& p : cfg.problems) {
    if (p.dim() != d) {
      throw ValidationError(fmt::format("agent problem '{}' has dimension {}, expected {}",
                                        p.base().name, p.dim(), d));
    }
  }
  if (static_cast<int>(cfg.problems.size()) != cfg.schedule.n()) {
    throw ValidationError(fmt::format("{} agent problems but the graph has {} nodes",
                                      cfg.problems.size(), cfg.schedule.n()));
  }
  if (!cfg.x0.empty()) {
    if (cfg.x0.size() != cfg.problems.size()) {
      throw ValidationError(fmt::format("x0 lists {} agents, expected {}", cfg.x0.size(),
                                        cfg.problems.size()));
    }
    for (std::size_t i = 0; i < cfg.x0.size(); ++i) {
      if (cfg.x0[i].size() != d) {
        throw ValidationError(fmt::format("x0 of agent {} has dimension {}, expected {}", i,
                                          cfg.x0[i].size(), d));
      }
    }
  }
  if (cfg.record_every < 1) throw ValidationError("record_every must be >= 1");
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

Engine::Engine(const RunConfig& cfg) : cfg_(cfg) {
  validate(cfg);
  const auto n = cfg.problems.size();
  const int d = cfg.problems.front().dim();
  agents_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = agents_[i];
    a.x = cfg.x0.empty() ? Vector::Zero(d) : cfg.x0[i];
    a.w = a.x;
    a.y = 1.0;
    a.z = a.x;
  }
  gradients_.assign(n, Vector::Zero(d));
  next_w_.assign(n, Vector::Zero(d));
  next_y_.assign(n, 0.0);
}

void Engine::step() {
  const Round t = round_;
  const DiGraph& g = cfg_.schedule.at(t);
  const double a = cfg_.params.step(t);
  const double r = cfg_.params.penalty(t);
  const int n = agent_count();

  // Mixing reads only the round-t snapshot.
  for (int i = 0; i < n; ++i) {
    next_w_[i].setZero();
    double y = 0.0;
    for (NodeId j : g.in_neighbors(i)) {
      const double d = g.out_degree(j);
      next_w_[i] += agents_[j].x / d;
      y += agents_[j].y / d;
    }
    next_y_[i] = y;
  }

  auto gradient_for = [&](int i) {
    const Vector z = next_w_[i] / next_y_[i];
    gradients_[i] = penalized_gradient(cfg_.problems[i], z, r);
  };
  const unsigned workers = std::min<unsigned>(cfg_.threads, static_cast<unsigned>(n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) gradient_for(i);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int i = static_cast<int>(w); i < n; i += static_cast<int>(workers)) gradient_for(i);
      });
    }
  }

  for (int i = 0; i < n; ++i) {
    if (!all_finite(gradients_[i])) {
      throw RuntimeFailure(fmt::format("non-finite gradient at agent {} in round {}", i, t));
    }
    auto& s = agents_[i];
    const Vector& base = cfg_.descend_from_stale_w ? s.w : next_w_[i];
    Vector x_next = base - a * gradients_[i];
    s.w = next_w_[i];
    s.y = next_y_[i];
    s.z = s.w / s.y;
    s.x = std::move(x_next);
  }
  last_step_size_ = a;
  ++round_;
}

MassInvariants Engine::mass_invariants() const {
  MassInvariants m;
  m.sum_x = Vector::Zero(agents_.front().x.size());
  for (const auto& s : agents_) {
    m.sum_y += s.y;
    m.sum_x += s.x;
  }
  return m;
}

Vector Engine::average_x() const { return mass_invariants().sum_x / agent_count(); }

Vector Engine::average_z() const {
  Vector sum = Vector::Zero(agents_.front().z.size());
  for (const auto& s : agents_) sum += s.z;
  return sum / agent_count();
}

double Engine::disagreement() const {
  const Vector zbar = average_z();
  double worst = 0.0;
  for (const auto& s : agents_) worst = std::max(worst, (s.z - zbar).norm());
  return worst;
}

double Engine::mean_penalty() const {
  const Vector xbar = average_x();
  double total = 0.0;
  for (const auto& p : cfg_.problems) total += penalty_value(p, xbar);
  return total / agent_count();
}

double Engine::objective() const {
  const Vector xbar = average_x();
  double total = 0.0;
  for (const auto& p : cfg_.problems) total += p.base().objective_value(xbar);
  return total;
}

MetricsRow Engine::snapshot(double walltime_ms) const {
  MetricsRow row;
  row.round = round_;
  row.disagreement = disagreement();
  row.mean_penalty = mean_penalty();
  row.objective = objective();
  row.walltime_ms = walltime_ms;
  row.avg_iterate = average_x();
  return row;
}

Engine init_run(const RunConfig& cfg) { return Engine(cfg); }

namespace {

std::vector<std::string> connectivity_warnings(const GraphSchedule& s, Round max_rounds) {
  std::vector<std::string> out;
  const Round horizon = std::max<Round>(std::min<Round>(max_rounds, 1000), 1);
  if (auto B = s.claimed_B()) {
    if (static_cast<Round>(*B) > horizon || !verify_B(s, *B, horizon)) {
      out.push_back(fmt::format("graph schedule is not {}-strongly connected over {} rounds", *B, horizon));
    }
    return out;
  }
  const int max_B = static_cast<int>(std::min<Round>(horizon, 64));
  if (!smallest_B(s, max_B, horizon)) {
    out.push_back(fmt::format("no B <= {} certifies strong connectivity of the graph schedule", max_B));
  }
  return out;
}

}  // namespace

RunMetrics run(const RunConfig& cfg) {
  Engine engine(cfg);
  RunMetrics out;
  out.warnings = connectivity_warnings(cfg.schedule, cfg.max_rounds);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    if (!cfg.record_walltime) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  auto record = [&] {
    out.rows.push_back(engine.snapshot(elapsed_ms()));
    if (cfg.trace_agents) {
      for (int i = 0; i < engine.agent_count(); ++i) {
        const auto& s = engine.agents()[i];
        out.trace.push_back({engine.round(), i, s.y, s.z});
      }
    }
  };

  while (engine.round() < cfg.max_rounds) {
    engine.step();
    bool stop = false;
    if (cfg.stop_tolerance) {
      stop = engine.disagreement() < *cfg.stop_tolerance && engine.mean_penalty() < *cfg.stop_tolerance;
    }
    if (stop || engine.round() % cfg.record_every == 0 || engine.round() == cfg.max_rounds) record();
    if (stop) {
      out.stopped_early = engine.round() < cfg.max_rounds;
      break;
    }
  }
  out.rounds_completed = engine.round();
  out.final_agents = engine.agents();
  return out;
}

}  // namespace pushsum
