#pragma once

#include "pushsum/penalty.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pushsum::energy {

/// Quadratic generation cost a p^2 + b p + c on [p_min, p_max] with linear
/// extensions outside, plus the transmission-loss coefficient.
struct GeneratorParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double loss = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  std::string name;
};

/// Saturating quadratic utility omega p - alpha p^2, linear beyond p = omega / (2 K alpha).
struct DemandParams {
  double omega = 0.0;
  double alpha = 0.0;
  double saturation = 0.0;  // K
  double p_min = 0.0;
  double p_max = 0.0;
  std::string name;
};

struct EnergyParams {
  std::vector<GeneratorParams> generators;
  std::vector<DemandParams> demands;
};

struct ValueGrad {
  double value = 0.0;
  double grad = 0.0;
};

ValueGrad cost_value_and_grad(const GeneratorParams& g, double p);
ValueGrad utility_value_and_grad(const DemandParams& d, double p);
/// C1 convex loss constraint: l p^2 - v on the box, tangent lines outside it.
ValueGrad loss_constraint_p(const GeneratorParams& g, double p);

/// Sum_j P_j^max >= Sum_i (p_i^min - l_i (p_i^min)^2).
bool check_demand_capacity(const EnergyParams& e);

struct SlaterPoint {
  Vector p;  // generators then demands
  Vector v;  // one per generator
};

struct SlaterResult {
  std::optional<SlaterPoint> point;
  std::string diagnostic;
};

/// Searches for a strictly feasible point of the convex reformulation:
/// strict box interior, v_i > l_i p_i^2 and exact power balance.
SlaterResult find_slater_point(const EnergyParams& e);

/// True iff the point satisfies every strict inequality and balances to `tol`.
bool is_strictly_feasible(const EnergyParams& e, const SlaterPoint& s, double tol = 1e-9);

/// Validated energy-management instance. Decision vector layout:
/// z = (p_gen_0..p_gen_{G-1}, p_dem_0..p_dem_{D-1}, v_0..v_{G-1}).
class EnergyInstance {
 public:
  /// Throws ValidationError naming the violated invariant and node.
  explicit EnergyInstance(EnergyParams params);

  const EnergyParams& params() const { return params_; }
  const std::vector<GeneratorParams>& generators() const { return params_.generators; }
  const std::vector<DemandParams>& demands() const { return params_.demands; }
  int generator_count() const { return static_cast<int>(params_.generators.size()); }
  int demand_count() const { return static_cast<int>(params_.demands.size()); }
  int node_count() const { return generator_count() + demand_count(); }
  int dim() const { return node_count() + generator_count(); }
  int p_index(int node) const { return node; }
  int v_index(int generator) const { return node_count() + generator; }
  const SlaterPoint& slater_point() const { return slater_; }

  /// Sum_i (p_i - v_i) - Sum_j p_j.
  double balance(const Vector& z) const;
  /// Sum C_i(p_i) - Sum U_j(p_j).
  double objective(const Vector& z) const;
  Vector split_p(const Vector& z) const { return z.head(node_count()); }
  Vector split_v(const Vector& z) const { return z.tail(generator_count()); }
  Vector join(const Vector& p, const Vector& v) const;

 private:
  EnergyParams params_;
  SlaterPoint slater_;
};

/// One penalized local problem per node: generators first, then demands.
std::vector<PenalizedProblem> build_distributed_problem(const EnergyInstance& e);

/// Lagrange multipliers for balance (lambda), loss (mu, per generator), lower
/// bounds (gamma) and upper bounds (theta, per node).
struct Multipliers {
  double lambda = 0.0;
  Vector mu;
  Vector gamma;
  Vector theta;
};

struct KKTResiduals {
  Vector stationarity_p;  // |dL/dp_k| per node
  Vector stationarity_v;  // |dL/dv_i| per generator
  double primal_feas = 0.0;
  double comp_slack = 0.0;
  double dual_feas = 0.0;

  double max_residual() const;
  nlohmann::json to_json() const;
};

/// Residuals of the KKT system of the convex reformulation at (p, v, m).
KKTResiduals kkt_residuals(const EnergyInstance& e, const Vector& p, const Vector& v, const Multipliers& m);

/// Least-squares multipliers for a candidate optimum: lambda from the nodes
/// strictly inside their boxes, mu_i = -lambda, and box multipliers from the
/// remaining stationarity residual of nodes within `active_tol` of a bound.
Multipliers estimate_multipliers(const EnergyInstance& e, const Vector& p, const Vector& v,
                                 double active_tol = 1e-4);

/// True iff v_i = l_i p_i^2 within tol for every generator and the power
/// balance holds within tol, i.e. the point is feasible for the original
/// non-convex dispatch problem.
bool loss_relaxation_tight(const EnergyInstance& e, const Vector& p, const Vector& v, double tol);

EnergyParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const EnergyParams& e);

}  // namespace pushsum::energy
