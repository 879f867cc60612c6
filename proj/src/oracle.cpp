#include "pushsum/oracle.hpp"

#include "pushsum/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace pushsum::oracle {

namespace {

void require_shared_dim(const std::vector<PenalizedProblem>& problems) {
  if (problems.empty()) throw std::invalid_argument("oracle needs at least one problem");
  for (const auto& p : problems) {
    if (p.dim() != problems.front().dim()) throw std::invalid_argument("oracle problems must share a dimension");
  }
}

struct Candidate {
  double value = std::numeric_limits<double>::infinity();
  std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
  Vector free;
};

}  // namespace

double total_objective(const std::vector<PenalizedProblem>& problems, const Vector& z) {
  double f = 0.0;
  for (const auto& p : problems) f += p.base().objective_value(z);
  return f;
}

double total_penalty(const std::vector<PenalizedProblem>& problems, const Vector& z) {
  double psi = 0.0;
  for (const auto& p : problems) psi += penalty_value(p, z);
  return psi;
}

double max_violation(const std::vector<PenalizedProblem>& problems, const Vector& z) {
  double worst = 0.0;
  for (const auto& p : problems) {
    if (!p.base().constraints.empty()) worst = std::max(worst, max_constraint(p, z));
  }
  return worst;
}

Vector centralized_penalized_solve(const std::vector<PenalizedProblem>& problems, const ParamSchedule& params,
                                   Round rounds, const std::optional<Vector>& start) {
  require_shared_dim(problems);
  const int d = problems.front().dim();
  Vector z = start.value_or(Vector::Zero(d));
  if (z.size() != d) throw std::invalid_argument("start point has the wrong dimension");
  for (Round t = 0; t < rounds; ++t) {
    const double a = params.step(t);
    const double r = params.penalty(t);
    Vector g = Vector::Zero(d);
    for (const auto& p : problems) g += penalized_gradient(p, z, r);
    if (!g.allFinite()) throw RuntimeFailure(fmt::format("centralized solver: non-finite gradient in round {}", t));
    z = z - a * g;
  }
  return z;
}

BruteForceResult brute_force_solve(const std::vector<PenalizedProblem>& problems, const std::vector<Interval>& box,
                                   const BruteForceOptions& opts, const Embedding& embed) {
  require_shared_dim(problems);
  const auto k = box.size();
  if (k == 0) throw std::invalid_argument("brute force needs at least one free coordinate");
  if (opts.grid < 2) throw std::invalid_argument("brute force grid needs at least 2 points per axis");
  const double total = std::pow(static_cast<double>(opts.grid), static_cast<double>(k));
  if (total > 1e8) {
    throw std::invalid_argument(fmt::format("grid of {}^{} points exceeds the 1e8 limit", opts.grid, k));
  }
  for (const auto& iv : box) {
    if (!(iv.lo <= iv.hi)) throw std::invalid_argument("brute force box has an empty interval");
  }
  const Embedding lift = embed ? embed : [](const Vector& f) { return f; };
  const auto points = static_cast<std::uint64_t>(total);

  auto evaluate = [&](const Vector& free) {
    const Vector z = lift(free);
    return total_objective(problems, z) + opts.penalty * total_penalty(problems, z);
  };

  std::vector<Interval> level = box;
  Candidate best;
  double spacing = 0.0;
  for (int depth = 0; depth <= opts.refine; ++depth) {
    spacing = 0.0;
    for (const auto& iv : level) spacing = std::max(spacing, (iv.hi - iv.lo) / (opts.grid - 1));

    auto scan = [&](std::uint64_t begin, std::uint64_t end) {
      Candidate local;
      Vector free(static_cast<Eigen::Index>(k));
      for (std::uint64_t idx = begin; idx < end; ++idx) {
        std::uint64_t rest = idx;
        for (std::size_t a = 0; a < k; ++a) {
          const auto step = rest % static_cast<std::uint64_t>(opts.grid);
          rest /= static_cast<std::uint64_t>(opts.grid);
          const auto& iv = level[a];
          free[static_cast<Eigen::Index>(a)] = iv.lo + (iv.hi - iv.lo) * static_cast<double>(step) / (opts.grid - 1);
        }
        const double v = evaluate(free);
        if (v < local.value) {
          local.value = v;
          local.index = idx;
          local.free = free;
        }
      }
      return local;
    };

    Candidate level_best;
    const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, 64));
    if (workers == 1) {
      level_best = scan(0, points);
    } else {
      std::vector<Candidate> partial(workers);
      {
        std::vector<std::jthread> pool;
        const std::uint64_t chunk = (points + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
          const std::uint64_t b = std::min<std::uint64_t>(points, w * chunk);
          const std::uint64_t e = std::min<std::uint64_t>(points, b + chunk);
          pool.emplace_back([&, w, b, e] { partial[w] = scan(b, e); });
        }
      }
      for (auto& c : partial) {
        if (c.value < level_best.value) level_best = std::move(c);
      }
    }
    if (!std::isfinite(level_best.value)) throw RuntimeFailure("brute force: objective is not finite on the grid");
    best = std::move(level_best);

    for (std::size_t a = 0; a < k; ++a) {
      const double half = 0.5 * (level[a].hi - level[a].lo) / 10.0;
      const double c = best.free[static_cast<Eigen::Index>(a)];
      level[a] = {std::max(box[a].lo, c - half), std::min(box[a].hi, c + half)};
    }
  }

  BruteForceResult out;
  out.free_point = best.free;
  out.point = lift(best.free);
  out.objective = total_objective(problems, out.point);
  out.penalized = best.value;
  out.max_violation = max_violation(problems, out.point);
  out.resolution = spacing;
  if (out.max_violation > opts.feasibility_tol) {
    throw RuntimeFailure(fmt::format("brute force: best point violates a constraint by {}; the box holds no "
                                     "feasible point",
                                     out.max_violation));
  }
  return out;
}

std::vector<PathPoint> penalty_path_probe(const std::vector<PenalizedProblem>& problems,
                                          const std::vector<double>& r_values, const PathOptions& opts) {
  require_shared_dim(problems);
  const int d = problems.front().dim();
  for (std::size_t i = 0; i < r_values.size(); ++i) {
    if (!(r_values[i] >= 1.0)) throw std::invalid_argument("penalty path needs r >= 1");
    if (i > 0 && !(r_values[i] > r_values[i - 1])) throw std::invalid_argument("penalty path needs increasing r");
  }

  Vector z = opts.start.value_or(Vector::Zero(d));
  std::vector<PathPoint> path;
  for (double r : r_values) {
    auto value = [&](const Vector& x) { return total_objective(problems, x) + r * total_penalty(problems, x); };
    auto gradient = [&](const Vector& x) {
      Vector g = Vector::Zero(d);
      for (const auto& p : problems) g += penalized_gradient(p, x, r);
      return g;
    };
    double step = 1.0;
    double fz = value(z);
    for (long it = 0; it < opts.max_iterations; ++it) {
      const Vector g = gradient(z);
      if (!g.allFinite() || !std::isfinite(fz)) {
        throw RuntimeFailure(fmt::format("penalty path diverged at r = {} after {} iterations", r, it));
      }
      const double gg = g.squaredNorm();
      if (std::sqrt(gg) <= opts.gradient_tol) break;
      // Armijo backtracking; the step may grow again by 2x after a success.
      step = std::min(step * 2.0, 1e6);
      Vector trial = z - step * g;
      double ft = value(trial);
      while (ft > fz - 0.5 * step * gg) {
        step *= 0.5;
        if (step < 1e-300) break;
        trial = z - step * g;
        ft = value(trial);
      }
      if (step < 1e-300 || !(ft < fz)) break;  // no further decrease representable
      z = std::move(trial);
      fz = ft;
    }
    path.push_back({r, z, fz, total_objective(problems, z), total_penalty(problems, z)});
  }
  return path;
}

Embedding energy_balance_embedding(const energy::EnergyInstance& e, int eliminated) {
  if (eliminated < 0 || eliminated >= e.demand_count()) throw std::invalid_argument("no such demand to eliminate");
  return [&e, eliminated](const Vector& free) {
    const int ng = e.generator_count();
    const int nn = e.node_count();
    const int target = ng + eliminated;
    Vector p(nn);
    Vector v(ng);
    for (int k = 0, f = 0; k < nn; ++k) {
      if (k != target) p[k] = free[f++];
    }
    double net = 0.0;
    for (int i = 0; i < ng; ++i) {
      v[i] = e.generators()[i].loss * p[i] * p[i];
      net += p[i] - v[i];
    }
    for (int k = ng; k < nn; ++k) {
      if (k != target) net -= p[k];
    }
    p[target] = net;
    return e.join(p, v);
  };
}

std::vector<Interval> energy_free_box(const energy::EnergyInstance& e, int eliminated) {
  std::vector<Interval> box;
  for (const auto& g : e.generators()) box.push_back({g.p_min, g.p_max});
  for (int j = 0; j < e.demand_count(); ++j) {
    if (j != eliminated) box.push_back({e.demands()[j].p_min, e.demands()[j].p_max});
  }
  return box;
}

BruteForceResult energy_brute_force(const energy::EnergyInstance& e, const std::vector<PenalizedProblem>& problems,
                                    const BruteForceOptions& opts) {
  std::optional<BruteForceResult> best;
  std::string failures;
  for (int j = 0; j < e.demand_count(); ++j) {
    try {
      auto r = brute_force_solve(problems, energy_free_box(e, j), opts, energy_balance_embedding(e, j));
      if (!best || r.penalized < best->penalized) best = std::move(r);
    } catch (const RuntimeFailure& ex) {
      failures += fmt::format(" [eliminating demand {}: {}]", j, ex.what());
    }
  }
  if (!best) throw RuntimeFailure("energy brute force found no feasible point:" + failures);
  return *best;
}

}  // namespace pushsum::oracle
