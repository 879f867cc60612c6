#pragma once

#include "pushsum/energy.hpp"
#include "pushsum/penalty.hpp"
#include "pushsum/schedules.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pushsum::oracle {

/// Full-information penalized gradient descent
///   z(t+1) = z(t) - a_t * sum_i [f_i(z) + r_t psi_i(z)]
/// started from `start` (zero vector by default).
Vector centralized_penalized_solve(const std::vector<PenalizedProblem>& problems, const ParamSchedule& params,
                                   Round rounds, const std::optional<Vector>& start = std::nullopt);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Maps the gridded free coordinates to a full decision vector.
using Embedding = std::function<Vector(const Vector& free)>;

struct BruteForceOptions {
  int grid = 41;         // points per axis, endpoints included
  int refine = 8;        // number of x10 zoom levels after the first pass
  double penalty = 1e6;  // fixed r in F + r Psi
  double feasibility_tol = 1e-3;
  unsigned threads = 1;
};

struct BruteForceResult {
  Vector point;       // full decision vector
  Vector free_point;  // gridded coordinates
  double objective = 0.0;
  double penalized = 0.0;
  double max_violation = 0.0;
  double resolution = 0.0;  // largest grid spacing of the last level
};

/// Multi-resolution grid search for min F + r Psi over `box`. Each level
/// re-centres a box 10x smaller on the incumbent (clipped to the original
/// box). Ties go to the lowest grid index, so the result does not depend on
/// the thread count. Throws RuntimeFailure when the best point is infeasible.
BruteForceResult brute_force_solve(const std::vector<PenalizedProblem>& problems, const std::vector<Interval>& box,
                                   const BruteForceOptions& opts = {}, const Embedding& embed = {});

struct PathOptions {
  std::optional<Vector> start;
  double gradient_tol = 1e-10;
  long max_iterations = 2'000'000;
};

struct PathPoint {
  double r = 0.0;
  Vector minimizer;
  double value = 0.0;      // F + r Psi at the minimizer
  double objective = 0.0;  // F at the minimizer
  double penalty = 0.0;    // Psi at the minimizer
};

/// Minimizes F + r Psi for each r (increasing, all >= 1) by backtracking
/// gradient descent, warm-starting each solve from the previous minimizer.
std::vector<PathPoint> penalty_path_probe(const std::vector<PenalizedProblem>& problems,
                                          const std::vector<double>& r_values, const PathOptions& opts = {});

/// Sum of objective values and of penalties over all problems.
double total_objective(const std::vector<PenalizedProblem>& problems, const Vector& z);
double total_penalty(const std::vector<PenalizedProblem>& problems, const Vector& z);
double max_violation(const std::vector<PenalizedProblem>& problems, const Vector& z);

/// Eliminates demand `eliminated` through the power balance and fixes
/// v_i = l_i p_i^2, leaving the other node powers (in node order) as free
/// coordinates. The instance must outlive the returned function.
Embedding energy_balance_embedding(const energy::EnergyInstance& e, int eliminated);
/// Boxes of the free coordinates of energy_balance_embedding.
std::vector<Interval> energy_free_box(const energy::EnergyInstance& e, int eliminated);

/// Brute force over every choice of eliminated demand, keeping the lowest
/// penalized objective (ties go to the lower demand index). Eliminating a
/// demand that sits on a bound leaves a thin penalty valley that the zoom
/// can miss, so trying each demand keeps the search robust.
BruteForceResult energy_brute_force(const energy::EnergyInstance& e, const std::vector<PenalizedProblem>& problems,
                                    const BruteForceOptions& opts = {});

}  // namespace pushsum::oracle
