#include "pushsum/energy.hpp"

#include "pushsum/errors.hpp"
#include "pushsum/json_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace pushsum::energy {

namespace {

std::string label(const std::string& name, std::string_view kind, std::size_t index) {
  return name.empty() ? fmt::format("{} {}", kind, index) : fmt::format("{} '{}'", kind, name);
}

double demand_level(const EnergyParams& e, double theta) {
  double total = 0.0;
  for (const auto& d : e.demands) total += d.p_min + theta * (d.p_max - d.p_min);
  return total;
}

}  // namespace

ValueGrad cost_value_and_grad(const GeneratorParams& g, double p) {
  auto quad = [&](double q) { return g.a * q * q + g.b * q + g.c; };
  if (p < g.p_min) {
    const double slope = 2.0 * g.a * g.p_min + g.b;
    return {quad(g.p_min) + slope * (p - g.p_min), slope};
  }
  if (p > g.p_max) {
    const double slope = 2.0 * g.a * g.p_max + g.b;
    return {quad(g.p_max) + slope * (p - g.p_max), slope};
  }
  return {quad(p), 2.0 * g.a * p + g.b};
}

ValueGrad utility_value_and_grad(const DemandParams& d, double p) {
  const double seam = d.omega / (2.0 * d.saturation * d.alpha);
  if (p <= seam) return {d.omega * p - d.alpha * p * p, d.omega - 2.0 * d.alpha * p};
  const double slope = d.omega * (1.0 - 1.0 / d.saturation);
  const double at_seam = d.omega * seam - d.alpha * seam * seam;
  return {at_seam + slope * (p - seam), slope};
}

ValueGrad loss_constraint_p(const GeneratorParams& g, double p) {
  const double l = g.loss;
  if (p < g.p_min) return {2.0 * l * g.p_min * p - l * g.p_min * g.p_min, 2.0 * l * g.p_min};
  if (p > g.p_max) return {2.0 * l * g.p_max * p - l * g.p_max * g.p_max, 2.0 * l * g.p_max};
  return {l * p * p, 2.0 * l * p};
}

bool check_demand_capacity(const EnergyParams& e) {
  double demand_cap = 0.0;
  for (const auto& d : e.demands) demand_cap += d.p_max;
  double generation_floor = 0.0;
  for (const auto& g : e.generators) generation_floor += g.p_min - g.loss * g.p_min * g.p_min;
  return demand_cap >= generation_floor;
}

bool is_strictly_feasible(const EnergyParams& e, const SlaterPoint& s, double tol) {
  const auto ng = e.generators.size();
  const auto nd = e.demands.size();
  if (static_cast<std::size_t>(s.p.size()) != ng + nd || static_cast<std::size_t>(s.v.size()) != ng) return false;
  double bal = 0.0;
  for (std::size_t i = 0; i < ng; ++i) {
    const auto& g = e.generators[i];
    const double p = s.p[i];
    if (!(g.p_min < p && p < g.p_max)) return false;
    if (!(s.v[i] > g.loss * p * p)) return false;
    bal += p - s.v[i];
  }
  for (std::size_t j = 0; j < nd; ++j) {
    const auto& d = e.demands[j];
    const double p = s.p[ng + j];
    if (!(d.p_min < p && p < d.p_max)) return false;
    bal -= p;
  }
  return std::abs(bal) <= tol * std::max(1.0, demand_level(e, 1.0));
}

SlaterResult find_slater_point(const EnergyParams& e) {
  SlaterResult out;
  if (e.generators.empty() || e.demands.empty()) {
    out.diagnostic = "instance needs at least one generator and one demand";
    return out;
  }
  for (std::size_t i = 0; i < e.generators.size(); ++i) {
    if (!(e.generators[i].p_min < e.generators[i].p_max)) {
      out.diagnostic = fmt::format("{} has p_min >= p_max; no strict interior",
                                   label(e.generators[i].name, "generator", i));
      return out;
    }
  }
  for (std::size_t j = 0; j < e.demands.size(); ++j) {
    if (!(e.demands[j].p_min < e.demands[j].p_max)) {
      out.diagnostic = fmt::format("{} has p_min >= p_max; no strict interior",
                                   label(e.demands[j].name, "demand", j));
      return out;
    }
  }

  const auto ng = e.generators.size();
  const auto nd = e.demands.size();
  constexpr std::array<double, 9> kFractions{0.5, 0.25, 0.75, 0.1, 0.9, 0.02, 0.98, 0.001, 0.999};
  constexpr double kInterior = 1e-6;

  for (double phi : kFractions) {
    SlaterPoint s{Vector(ng + nd), Vector(ng)};
    double supply = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
      const auto& g = e.generators[i];
      s.p[i] = g.p_min + phi * (g.p_max - g.p_min);
      supply += s.p[i] - g.loss * s.p[i] * s.p[i];
    }
    // The loss slack absorbs whatever generation the demands do not take.
    const double target_slack = 1e-3 * std::max(1.0, std::abs(supply));
    const double wanted = supply - target_slack;
    double theta = 0.5;
    if (wanted <= demand_level(e, kInterior)) continue;
    if (wanted < demand_level(e, 1.0 - kInterior)) {
      double lo = kInterior;
      double hi = 1.0 - kInterior;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (demand_level(e, mid) < wanted ? lo : hi) = mid;
      }
      theta = 0.5 * (lo + hi);
    }
    double demand = 0.0;
    for (std::size_t j = 0; j < nd; ++j) {
      const auto& d = e.demands[j];
      s.p[ng + j] = d.p_min + theta * (d.p_max - d.p_min);
      demand += s.p[ng + j];
    }
    const double slack = (supply - demand) / static_cast<double>(ng);
    if (!(slack > 0.0)) continue;
    for (std::size_t i = 0; i < ng; ++i) s.v[i] = e.generators[i].loss * s.p[i] * s.p[i] + slack;
    if (is_strictly_feasible(e, s)) {
      out.point = std::move(s);
      out.diagnostic = fmt::format("generator fraction {}, demand fraction {}, loss slack {}", phi, theta, slack);
      return out;
    }
  }
  out.diagnostic = "no strictly feasible point found: generation floor cannot be absorbed by demand";
  return out;
}

EnergyInstance::EnergyInstance(EnergyParams params) : params_(std::move(params)) {
  if (params_.generators.empty()) throw ValidationError("energy instance needs at least one generator");
  if (params_.demands.empty()) throw ValidationError("energy instance needs at least one demand");
  for (std::size_t i = 0; i < params_.generators.size(); ++i) {
    const auto& g = params_.generators[i];
    const auto who = label(g.name, "generator", i);
    if (!(g.a > 0.0 && g.b > 0.0 && g.c > 0.0)) {
      throw ValidationError(fmt::format("{}: cost coefficients a, b, c must be positive", who));
    }
    if (!(g.loss >= 0.0 && g.loss < g.a)) {
      throw ValidationError(fmt::format("{}: loss coefficient must satisfy 0 <= l < a", who));
    }
    if (!(g.p_min < g.p_max)) throw ValidationError(fmt::format("{}: requires p_min < p_max", who));
  }
  for (std::size_t j = 0; j < params_.demands.size(); ++j) {
    const auto& d = params_.demands[j];
    const auto who = label(d.name, "demand", j);
    if (!(d.omega > 0.0 && d.alpha > 0.0)) {
      throw ValidationError(fmt::format("{}: utility coefficients omega, alpha must be positive", who));
    }
    if (!(d.saturation > 1.0)) {
      throw ValidationError(fmt::format("{}: saturation constant K must exceed 1 so utility stays increasing", who));
    }
    if (!(d.p_min < d.p_max)) throw ValidationError(fmt::format("{}: requires p_min < p_max", who));
  }
  if (!check_demand_capacity(params_)) {
    throw ValidationError(
        "demand capacity condition violated: total demand capacity is below the minimal net generation");
  }
  auto slater = find_slater_point(params_);
  if (!slater.point) throw ValidationError("no strictly feasible (Slater) point: " + slater.diagnostic);
  slater_ = std::move(*slater.point);
}

double EnergyInstance::balance(const Vector& z) const {
  double bal = 0.0;
  for (int i = 0; i < generator_count(); ++i) bal += z[p_index(i)] - z[v_index(i)];
  for (int j = 0; j < demand_count(); ++j) bal -= z[p_index(generator_count() + j)];
  return bal;
}

double EnergyInstance::objective(const Vector& z) const {
  double f = 0.0;
  for (int i = 0; i < generator_count(); ++i) f += cost_value_and_grad(generators()[i], z[p_index(i)]).value;
  for (int j = 0; j < demand_count(); ++j) {
    f -= utility_value_and_grad(demands()[j], z[p_index(generator_count() + j)]).value;
  }
  return f;
}

Vector EnergyInstance::join(const Vector& p, const Vector& v) const {
  Vector z(dim());
  z << p, v;
  return z;
}

std::vector<PenalizedProblem> build_distributed_problem(const EnergyInstance& e) {
  const int dim = e.dim();
  const int ng = e.generator_count();
  const int nn = e.node_count();

  Vector balance_coeffs = Vector::Zero(dim);
  for (int i = 0; i < ng; ++i) {
    balance_coeffs[e.p_index(i)] = 1.0;
    balance_coeffs[e.v_index(i)] = -1.0;
  }
  for (int k = ng; k < nn; ++k) balance_coeffs[e.p_index(k)] = -1.0;

  auto box_constraints = [&](int k, double lo, double hi, std::vector<ConstraintFn>& out) {
    Vector unit = Vector::Zero(dim);
    unit[k] = 1.0;
    out.push_back(affine_constraint(unit, -hi, fmt::format("p{}<=max", k)));
    out.push_back(affine_constraint(-unit, lo, fmt::format("p{}>=min", k)));
  };

  std::vector<PenalizedProblem> out;
  out.reserve(nn);
  for (int i = 0; i < ng; ++i) {
    const auto g = e.generators()[i];
    const int pk = e.p_index(i);
    const int vk = e.v_index(i);
    LocalProblem lp;
    lp.dim = dim;
    lp.name = g.name.empty() ? fmt::format("generator{}", i) : g.name;
    lp.objective_value = [g, pk](const Vector& z) { return cost_value_and_grad(g, z[pk]).value; };
    lp.objective_grad = [g, pk, dim](const Vector& z) {
      Vector grad = Vector::Zero(dim);
      grad[pk] = cost_value_and_grad(g, z[pk]).grad;
      return grad;
    };
    box_constraints(pk, g.p_min, g.p_max, lp.constraints);
    for (auto& c : equality_as_inequalities(affine_constraint(balance_coeffs, 0.0, "balance"))) {
      lp.constraints.push_back(std::move(c));
    }
    ConstraintFn loss;
    loss.name = fmt::format("loss{}", i);
    loss.value = [g, pk, vk](const Vector& z) { return loss_constraint_p(g, z[pk]).value - z[vk]; };
    loss.grad = [g, pk, vk, dim](const Vector& z) {
      Vector grad = Vector::Zero(dim);
      grad[pk] = loss_constraint_p(g, z[pk]).grad;
      grad[vk] = -1.0;
      return grad;
    };
    const double steepest = 2.0 * g.loss * std::max(std::abs(g.p_min), std::abs(g.p_max));
    loss.grad_bound = std::sqrt(steepest * steepest + 1.0);
    loss.lipschitz_bound = 2.0 * g.loss;
    lp.constraints.push_back(std::move(loss));
    out.emplace_back(std::move(lp));
  }
  for (int j = 0; j < e.demand_count(); ++j) {
    const auto d = e.demands()[j];
    const int pk = e.p_index(ng + j);
    LocalProblem lp;
    lp.dim = dim;
    lp.name = d.name.empty() ? fmt::format("demand{}", j) : d.name;
    lp.objective_value = [d, pk](const Vector& z) { return -utility_value_and_grad(d, z[pk]).value; };
    lp.objective_grad = [d, pk, dim](const Vector& z) {
      Vector grad = Vector::Zero(dim);
      grad[pk] = -utility_value_and_grad(d, z[pk]).grad;
      return grad;
    };
    box_constraints(pk, d.p_min, d.p_max, lp.constraints);
    out.emplace_back(std::move(lp));
  }
  return out;
}

double KKTResiduals::max_residual() const {
  double m = std::max({primal_feas, comp_slack, dual_feas});
  if (stationarity_p.size() > 0) m = std::max(m, stationarity_p.maxCoeff());
  if (stationarity_v.size() > 0) m = std::max(m, stationarity_v.maxCoeff());
  return m;
}

nlohmann::json KKTResiduals::to_json() const {
  return {{"stationarity_p", std::vector<double>(stationarity_p.begin(), stationarity_p.end())},
          {"stationarity_v", std::vector<double>(stationarity_v.begin(), stationarity_v.end())},
          {"primal_feas", primal_feas},
          {"comp_slack", comp_slack},
          {"dual_feas", dual_feas}};
}

namespace {

struct NodeBox {
  double lo;
  double hi;
};

NodeBox node_box(const EnergyInstance& e, int k) {
  const int ng = e.generator_count();
  if (k < ng) return {e.generators()[k].p_min, e.generators()[k].p_max};
  return {e.demands()[k - ng].p_min, e.demands()[k - ng].p_max};
}

void check_sizes(const EnergyInstance& e, const Vector& p, const Vector& v) {
  if (p.size() != e.node_count() || v.size() != e.generator_count()) {
    throw std::invalid_argument(fmt::format("expected {} powers and {} loss variables, got {} and {}",
                                            e.node_count(), e.generator_count(), p.size(), v.size()));
  }
}

}  // namespace

KKTResiduals kkt_residuals(const EnergyInstance& e, const Vector& p, const Vector& v, const Multipliers& m) {
  check_sizes(e, p, v);
  const int ng = e.generator_count();
  const int nn = e.node_count();
  if (m.mu.size() != ng || m.gamma.size() != nn || m.theta.size() != nn) {
    throw std::invalid_argument("multiplier dimensions do not match the instance");
  }
  KKTResiduals r;
  r.stationarity_p = Vector::Zero(nn);
  r.stationarity_v = Vector::Zero(ng);

  for (int i = 0; i < ng; ++i) {
    const auto& g = e.generators()[i];
    const double dl = loss_constraint_p(g, p[i]).grad;
    r.stationarity_p[i] =
        std::abs(cost_value_and_grad(g, p[i]).grad + m.lambda + m.mu[i] * dl - m.gamma[i] + m.theta[i]);
    // L contains -lambda v_i - mu_i v_i.
    r.stationarity_v[i] = std::abs(-m.lambda - m.mu[i]);
  }
  for (int j = 0; j < e.demand_count(); ++j) {
    const int k = ng + j;
    r.stationarity_p[k] =
        std::abs(-utility_value_and_grad(e.demands()[j], p[k]).grad - m.lambda - m.gamma[k] + m.theta[k]);
  }

  double bal = 0.0;
  for (int i = 0; i < ng; ++i) bal += p[i] - v[i];
  for (int k = ng; k < nn; ++k) bal -= p[k];
  r.primal_feas = std::abs(bal);
  for (int k = 0; k < nn; ++k) {
    const auto box = node_box(e, k);
    r.primal_feas = std::max({r.primal_feas, box.lo - p[k], p[k] - box.hi});
    r.comp_slack = std::max({r.comp_slack, std::abs(m.gamma[k] * (box.lo - p[k])),
                             std::abs(m.theta[k] * (p[k] - box.hi))});
    r.dual_feas = std::max({r.dual_feas, -m.gamma[k], -m.theta[k]});
  }
  for (int i = 0; i < ng; ++i) {
    const double c = loss_constraint_p(e.generators()[i], p[i]).value - v[i];
    r.primal_feas = std::max(r.primal_feas, c);
    r.comp_slack = std::max(r.comp_slack, std::abs(m.mu[i] * c));
    r.dual_feas = std::max(r.dual_feas, -m.mu[i]);
  }
  return r;
}

Multipliers estimate_multipliers(const EnergyInstance& e, const Vector& p, const Vector& v, double active_tol) {
  check_sizes(e, p, v);
  const int ng = e.generator_count();
  const int nn = e.node_count();

  // Stationarity of node k reads alpha_k + beta_k * lambda - gamma_k + theta_k = 0
  // once mu_i = -lambda is substituted for generators.
  Vector alpha(nn), beta(nn);
  for (int i = 0; i < ng; ++i) {
    const auto& g = e.generators()[i];
    alpha[i] = cost_value_and_grad(g, p[i]).grad;
    beta[i] = 1.0 - loss_constraint_p(g, p[i]).grad;
  }
  for (int j = 0; j < e.demand_count(); ++j) {
    alpha[ng + j] = -utility_value_and_grad(e.demands()[j], p[ng + j]).grad;
    beta[ng + j] = -1.0;
  }

  std::vector<bool> at_lower(nn), at_upper(nn);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < nn; ++k) {
    const auto box = node_box(e, k);
    at_lower[k] = p[k] <= box.lo + active_tol * std::max(1.0, std::abs(box.lo));
    at_upper[k] = p[k] >= box.hi - active_tol * std::max(1.0, std::abs(box.hi));
    if (!at_lower[k] && !at_upper[k]) {
      num += alpha[k] * beta[k];
      den += beta[k] * beta[k];
    }
  }
  if (den == 0.0) {
    // Every node sits on a bound; fall back to the least-squares fit over all nodes.
    num = alpha.dot(beta);
    den = beta.squaredNorm();
  }

  Multipliers m;
  m.lambda = -num / den;
  m.mu = Vector::Constant(ng, -m.lambda);
  m.gamma = Vector::Zero(nn);
  m.theta = Vector::Zero(nn);
  for (int k = 0; k < nn; ++k) {
    const double rest = alpha[k] + beta[k] * m.lambda;
    if (at_lower[k] && rest > 0.0) m.gamma[k] = rest;
    if (at_upper[k] && rest < 0.0) m.theta[k] = -rest;
  }
  return m;
}

bool loss_relaxation_tight(const EnergyInstance& e, const Vector& p, const Vector& v, double tol) {
  check_sizes(e, p, v);
  for (int i = 0; i < e.generator_count(); ++i) {
    const double l = e.generators()[i].loss;
    if (std::abs(v[i] - l * p[i] * p[i]) > tol) return false;
  }
  return std::abs(e.balance(e.join(p, v))) <= tol;
}

EnergyParams params_from_json(const nlohmann::json& j) {
  using namespace json_util;
  require_keys(j, {"type", "generators", "demands"}, "problem");
  EnergyParams e;
  if (!j.contains("generators") || !j["generators"].is_array()) {
    throw ValidationError("problem: 'generators' must be an array");
  }
  if (!j.contains("demands") || !j["demands"].is_array()) {
    throw ValidationError("problem: 'demands' must be an array");
  }
  for (std::size_t i = 0; i < j["generators"].size(); ++i) {
    const auto& g = j["generators"][i];
    const auto where = fmt::format("generators[{}]", i);
    require_keys(g, {"name", "a", "b", "c", "loss", "p_min", "p_max"}, where);
    e.generators.push_back({number(g, "a", where), number(g, "b", where), number(g, "c", where),
                            number(g, "loss", where), number(g, "p_min", where), number(g, "p_max", where),
                            g.contains("name") ? text(g, "name", where) : std::string{}});
  }
  for (std::size_t k = 0; k < j["demands"].size(); ++k) {
    const auto& d = j["demands"][k];
    const auto where = fmt::format("demands[{}]", k);
    require_keys(d, {"name", "omega", "alpha", "K", "p_min", "p_max"}, where);
    e.demands.push_back({number(d, "omega", where), number(d, "alpha", where), number(d, "K", where),
                         number(d, "p_min", where), number(d, "p_max", where),
                         d.contains("name") ? text(d, "name", where) : std::string{}});
  }
  return e;
}

nlohmann::json params_to_json(const EnergyParams& e) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : e.generators) {
    gens.push_back({{"name", g.name}, {"a", g.a}, {"b", g.b}, {"c", g.c}, {"loss", g.loss},
                    {"p_min", g.p_min}, {"p_max", g.p_max}});
  }
  nlohmann::json dems = nlohmann::json::array();
  for (const auto& d : e.demands) {
    dems.push_back({{"name", d.name}, {"omega", d.omega}, {"alpha", d.alpha}, {"K", d.saturation},
                    {"p_min", d.p_min}, {"p_max", d.p_max}});
  }
  return {{"type", "energy"}, {"generators", gens}, {"demands", dems}};
}

}  // namespace pushsum::energy
