#include "pushsum/commands.hpp"

#include "pushsum/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

namespace pushsum {

using nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_of(const json& j, std::string_view what) {
  if (!j.is_array()) throw ValidationError(fmt::format("{} must be an array of numbers", what));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(fmt::format("{} must be an array of numbers", what));
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw RuntimeFailure(fmt::format("failed while writing '{}'", path.string()));
}

std::ostream& err_stream(const CommandOptions& o) { return o.log ? *o.log : std::cerr; }
std::ostream& out_stream(const CommandOptions& o) { return o.report ? *o.report : std::cout; }

template <class Body>
int guarded(const CommandOptions& opts, const char* name, Body&& body) {
  try {
    return body();
  } catch (const ValidationError& ex) {
    err_stream(opts) << name << ": invalid input: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const RuntimeFailure& ex) {
    err_stream(opts) << name << ": runtime failure: " << ex.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& ex) {
    err_stream(opts) << name << ": runtime failure: " << ex.what() << '\n';
    return kExitRuntime;
  }
}

ExperimentConfig load(const CommandOptions& opts) {
  ExperimentConfig cfg = load_config(opts.config, opts.seed);
  cfg.run.threads = effective_threads(cfg.run.threads);
  return cfg;
}

std::vector<oracle::Interval> default_box(const ExperimentConfig& cfg) {
  if (cfg.oracle.box) return *cfg.oracle.box;
  const int d = cfg.run.problems.front().dim();
  std::vector<oracle::Interval> box(static_cast<std::size_t>(d), {-10.0, 10.0});
  if (!cfg.targets.empty()) {
    for (int k = 0; k < d; ++k) {
      double lo = cfg.targets.front()[k], hi = lo;
      for (const auto& c : cfg.targets) {
        lo = std::min(lo, c[k]);
        hi = std::max(hi, c[k]);
      }
      box[static_cast<std::size_t>(k)] = {lo - 1.0, hi + 1.0};
    }
  }
  return box;
}

json constraint_slacks(const std::vector<PenalizedProblem>& problems, const Vector& z) {
  json out = json::array();
  for (std::size_t i = 0; i < problems.size(); ++i) {
    for (const auto& c : problems[i].base().constraints) {
      out.push_back({{"agent", i}, {"constraint", c.name}, {"slack", -c.value(z)}});
    }
  }
  return out;
}

}  // namespace

unsigned effective_threads(unsigned configured) {
  unsigned threads = std::max(1u, configured);
  if (const char* env = std::getenv("PUSHSUM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) threads = std::min(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

std::string metrics_csv(const RunMetrics& m, int dim) {
  std::string s = "round,disagreement,mean_penalty,objective,walltime_ms";
  for (int k = 0; k < dim; ++k) s += fmt::format(",x_bar_{}", k);
  s += '\n';
  for (const auto& r : m.rows) {
    s += fmt::format("{},{},{},{},{}", r.round, r.disagreement, r.mean_penalty, r.objective, r.walltime_ms);
    for (int k = 0; k < dim; ++k) s += fmt::format(",{}", r.avg_iterate[k]);
    s += '\n';
  }
  return s;
}

std::string trace_csv(const RunMetrics& m, int dim) {
  std::string s = "round,agent,y";
  for (int k = 0; k < dim; ++k) s += fmt::format(",z_{}", k);
  s += '\n';
  for (const auto& r : m.trace) {
    s += fmt::format("{},{},{}", r.round, r.agent, r.y);
    for (int k = 0; k < dim; ++k) s += fmt::format(",{}", r.z[k]);
    s += '\n';
  }
  return s;
}

std::string relative_error_csv(const RunMetrics& m, const Vector& reference, int coords,
                               const std::vector<std::string>& names) {
  std::string s = "round";
  for (int k = 0; k < coords; ++k) s += "," + names.at(static_cast<std::size_t>(k));
  s += '\n';
  for (const auto& r : m.rows) {
    s += fmt::format("{}", r.round);
    for (int k = 0; k < coords; ++k) {
      const double diff = std::abs(r.avg_iterate[k] - reference[k]);
      const double scale = std::abs(reference[k]);
      s += fmt::format(",{}", scale > 0.0 ? diff / scale : diff);
    }
    s += '\n';
  }
  return s;
}

std::vector<std::string> solution_coordinate_names(const ExperimentConfig& cfg) {
  std::vector<std::string> names;
  if (cfg.energy) {
    for (const auto& g : cfg.energy->generators()) names.push_back("p_" + g.name);
    for (const auto& d : cfg.energy->demands()) names.push_back("p_" + d.name);
    return names;
  }
  for (int k = 0; k < cfg.run.problems.front().dim(); ++k) names.push_back(fmt::format("x_{}", k));
  return names;
}

json final_json(const ExperimentConfig& cfg, const RunMetrics& m) {
  const auto n = m.final_agents.size();
  const int d = cfg.run.problems.front().dim();
  Vector xbar = Vector::Zero(d), zbar = Vector::Zero(d);
  json agents = json::array();
  for (const auto& a : m.final_agents) {
    xbar += a.x;
    zbar += a.z;
    agents.push_back({{"x", to_json(a.x)}, {"y", a.y}, {"z", to_json(a.z)}});
  }
  xbar /= static_cast<double>(n);
  zbar /= static_cast<double>(n);
  json j{{"version", kConfigVersion},
         {"problem", cfg.problem_type},
         {"schedule", cfg.run.params.describe()},
         {"seed", cfg.seed},
         {"rounds_completed", m.rounds_completed},
         {"stopped_early", m.stopped_early},
         {"x_bar", to_json(xbar)},
         {"z_bar", to_json(zbar)},
         {"agents", agents},
         {"warnings", m.warnings}};
  if (!m.rows.empty()) {
    const auto& last = m.rows.back();
    j["disagreement"] = last.disagreement;
    j["mean_penalty"] = last.mean_penalty;
    j["objective"] = last.objective;
  }
  if (cfg.energy) {
    json power = json::object();
    const auto names = solution_coordinate_names(cfg);
    for (int k = 0; k < cfg.energy->node_count(); ++k) power[names[static_cast<std::size_t>(k)]] = zbar[k];
    j["power"] = power;
  }
  return j;
}

json oracle_report(const ExperimentConfig& cfg) {
  const auto& problems = cfg.run.problems;
  const int n = static_cast<int>(problems.size());
  const auto& os = cfg.oracle;

  oracle::BruteForceOptions bf_opts;
  bf_opts.grid = os.grid;
  bf_opts.refine = os.refine;
  bf_opts.penalty = os.penalty;
  bf_opts.threads = cfg.run.threads;
  oracle::BruteForceResult bf;
  try {
    if (cfg.energy && os.box) {
      // An explicit box grids the powers with the last demand eliminated.
      const int last = cfg.energy->demand_count() - 1;
      bf = oracle::brute_force_solve(problems, *os.box, bf_opts, oracle::energy_balance_embedding(*cfg.energy, last));
    } else if (cfg.energy) {
      bf = oracle::energy_brute_force(*cfg.energy, problems, bf_opts);
    } else {
      bf = oracle::brute_force_solve(problems, default_box(cfg), bf_opts);
    }
  } catch (const std::invalid_argument& ex) {
    throw ValidationError(fmt::format("brute-force oracle: {}", ex.what()));
  }

  // Centralized reference: either a constant-parameter descent or the run's
  // schedule with steps divided by n (the average dynamics of the network).
  Vector central;
  json central_info;
  if (os.centralized) {
    const auto& c = *os.centralized;
    const ParamSchedule constant = custom_power_schedule(c.step, 0.0, c.penalty, 0.0);
    central = oracle::centralized_penalized_solve(problems, constant, c.rounds);
    central_info = {{"rounds", c.rounds}, {"step", c.step}, {"penalty", c.penalty}};
  } else {
    const ParamSchedule& base = cfg.run.params;
    const ParamSchedule averaged([&base, n](Round t) { return base.step(t) / n; },
                                 [&base](Round t) { return base.penalty(t); }, ParamSchedule::Family::Custom);
    central = oracle::centralized_penalized_solve(problems, averaged, cfg.run.max_rounds);
    central_info = {{"rounds", cfg.run.max_rounds}, {"schedule", base.describe() + " with steps divided by n"}};
  }
  central_info["point"] = to_json(central);
  central_info["objective"] = oracle::total_objective(problems, central);
  central_info["max_violation"] = oracle::max_violation(problems, central);

  const double diff = (central - bf.point).lpNorm<Eigen::Infinity>();
  const double tol = 10.0 * bf.resolution + os.agreement_tol;
  const bool agree = diff <= tol;

  json report{{"version", kConfigVersion},
              {"problem", cfg.problem_type},
              {"solution", to_json(bf.point)},
              {"brute_force",
               {{"point", to_json(bf.point)},
                {"free_point", to_json(bf.free_point)},
                {"objective", bf.objective},
                {"penalized_objective", bf.penalized},
                {"max_violation", bf.max_violation},
                {"resolution", bf.resolution},
                {"grid", os.grid},
                {"refine", os.refine},
                {"penalty", os.penalty},
                {"slacks", constraint_slacks(problems, bf.point)}}},
              {"centralized", central_info},
              {"agreement", {{"max_abs_diff", diff}, {"tolerance", tol}, {"pass", agree}}}};
  bool ok = agree;

  if (cfg.energy) {
    const auto& e = *cfg.energy;
    const Vector p = e.split_p(bf.point);
    const Vector v = e.split_v(bf.point);
    const auto m = energy::estimate_multipliers(e, p, v);
    const auto kkt = energy::kkt_residuals(e, p, v, m);
    const bool tight = energy::loss_relaxation_tight(e, p, v, 1e-4);
    json power = json::object();
    const auto names = solution_coordinate_names(cfg);
    for (int k = 0; k < e.node_count(); ++k) power[names[static_cast<std::size_t>(k)]] = p[k];
    report["power"] = power;
    report["loss"] = to_json(v);
    report["price"] = -m.lambda;
    report["multipliers"] = {{"lambda", m.lambda}, {"mu", to_json(m.mu)}, {"gamma", to_json(m.gamma)},
                             {"theta", to_json(m.theta)}};
    report["kkt"] = kkt.to_json();
    report["kkt_max_residual"] = kkt.max_residual();
    report["loss_relaxation_tight"] = tight;
    ok = ok && tight && kkt.max_residual() <= 1e-4;
  }

  const bool constrained = std::any_of(problems.begin(), problems.end(),
                                       [](const PenalizedProblem& p) { return !p.base().constraints.empty(); });
  if (!cfg.energy && constrained) {
    json path = json::array();
    for (const auto& pt : oracle::penalty_path_probe(problems, os.path_r)) {
      path.push_back({{"r", pt.r},
                      {"minimizer", to_json(pt.minimizer)},
                      {"penalized_value", pt.value},
                      {"objective", pt.objective},
                      {"distance_to_solution", (pt.minimizer - bf.point).norm()}});
    }
    report["penalty_path"] = path;
  }
  report["pass"] = ok;
  return report;
}

json check_report(const ExperimentConfig& cfg) {
  const auto& s = cfg.run.schedule;
  const Round horizon = std::max<Round>(1000, std::min<Round>(cfg.run.max_rounds, 100000));
  json graph{{"nodes", s.n()}, {"graphs", s.graphs().size()}, {"horizon", horizon}};
  bool graph_ok = false;
  if (s.claimed_B()) {
    graph_ok = verify_B(s, *s.claimed_B(), horizon);
    graph["claimed_B"] = *s.claimed_B();
    graph["verify_B"] = graph_ok;
  } else {
    graph["claimed_B"] = nullptr;
  }
  const auto smallest = smallest_B(s, 64, horizon);
  graph["smallest_B"] = smallest ? json(*smallest) : json(nullptr);
  if (!s.claimed_B()) graph_ok = smallest.has_value();
  graph["pass"] = graph_ok;

  const CertReport cert = certify_schedule(cfg.run.params, std::max<Round>(1000, cfg.run.max_rounds));
  json schedule = cert.to_json();
  schedule["description"] = cfg.run.params.describe();

  json bounds = json::array();
  bool bounds_ok = true;
  {
    std::mt19937_64 rng(cfg.seed);
    const int d = cfg.run.problems.front().dim();
    SampleBox box{Vector::Constant(d, -10.0), Vector::Constant(d, 10.0)};
    if (cfg.energy) {
      const auto& e = *cfg.energy;
      for (int k = 0; k < e.generator_count(); ++k) {
        const auto& g = e.generators()[k];
        box.lower[k] = g.p_min;
        box.upper[k] = g.p_max;
        box.lower[e.v_index(k)] = 0.0;
        box.upper[e.v_index(k)] = 2.0 * g.loss * g.p_max * g.p_max;
      }
      for (int k = 0; k < e.demand_count(); ++k) {
        box.lower[e.generator_count() + k] = e.demands()[k].p_min;
        box.upper[e.generator_count() + k] = e.demands()[k].p_max;
      }
    }
    for (std::size_t i = 0; i < cfg.run.problems.size(); ++i) {
      const auto& base = cfg.run.problems[i].base();
      const BoundCheck bc = verify_declared_bounds(base, box, 200, rng);
      const double mismatch = objective_gradient_mismatch(base, box, 50, rng);
      const bool ok = bc.ok && mismatch < 1e-4;
      bounds_ok = bounds_ok && ok;
      bounds.push_back({{"agent", i},
                        {"pass", ok},
                        {"worst_gradient_ratio", bc.worst_gradient_ratio},
                        {"worst_lipschitz_ratio", bc.worst_lipschitz_ratio},
                        {"gradient_mismatch", mismatch},
                        {"message", bc.message}});
    }
  }

  json report{{"version", kConfigVersion},
              {"problem", cfg.problem_type},
              {"graph", graph},
              {"schedule", schedule},
              {"declared_bounds", bounds}};
  bool ok = graph_ok && cert.accepted() && bounds_ok;
  if (cfg.energy) {
    const auto& e = *cfg.energy;
    const bool a4 = energy::check_demand_capacity(e.params());
    const auto slater = energy::find_slater_point(e.params());
    json inst{{"demand_capacity_condition", a4}, {"slater_diagnostic", slater.diagnostic}};
    if (slater.point) {
      inst["slater_point"] = {{"p", to_json(slater.point->p)},
                              {"v", to_json(slater.point->v)},
                              {"strictly_feasible", energy::is_strictly_feasible(e.params(), *slater.point)}};
    } else {
      inst["slater_point"] = nullptr;
    }
    report["instance"] = inst;
    ok = ok && a4 && slater.point.has_value();
  }
  report["pass"] = ok;
  return report;
}

int cmd_run(const CommandOptions& opts) {
  return guarded(opts, "run", [&] {
    const ExperimentConfig cfg = load(opts);
    const int d = cfg.run.problems.front().dim();
    std::optional<Vector> reference;
    if (opts.oracle_solution) {
      std::ifstream in(*opts.oracle_solution);
      if (!in) throw ValidationError(fmt::format("cannot open oracle file '{}'", opts.oracle_solution->string()));
      json oj;
      try {
        oj = json::parse(in);
      } catch (const json::parse_error& ex) {
        throw ValidationError(fmt::format("oracle file is not valid JSON: {}", ex.what()));
      }
      if (!oj.contains("solution")) throw ValidationError("oracle file has no 'solution' field");
      reference = vector_of(oj["solution"], "oracle solution");
      if (reference->size() != d) throw ValidationError("oracle solution dimension does not match the problem");
    }
    if (opts.out.empty()) throw ValidationError("run needs an output directory");

    const RunMetrics m = run(cfg.run);
    for (const auto& w : m.warnings) err_stream(opts) << "run: warning: " << w << '\n';

    std::filesystem::create_directories(opts.out);
    write_file(opts.out / "metrics.csv", metrics_csv(m, d));
    write_file(opts.out / "final.json", final_json(cfg, m).dump(2) + "\n");
    if (cfg.run.trace_agents) write_file(opts.out / "trace.csv", trace_csv(m, d));
    if (reference) {
      const auto names = solution_coordinate_names(cfg);
      write_file(opts.out / "relative_error.csv",
                 relative_error_csv(m, *reference, static_cast<int>(names.size()), names));
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_oracle(const CommandOptions& opts) {
  return guarded(opts, "oracle", [&] {
    const ExperimentConfig cfg = load(opts);
    if (opts.out.empty()) throw ValidationError("oracle needs an output directory");
    const json report = oracle_report(cfg);
    std::filesystem::create_directories(opts.out);
    write_file(opts.out / "oracle.json", report.dump(2) + "\n");
    if (!report["pass"].get<bool>()) {
      err_stream(opts) << "oracle: consistency checks failed: agreement "
                       << report["agreement"].dump() << '\n';
      return static_cast<int>(kExitRuntime);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_check(const CommandOptions& opts) {
  return guarded(opts, "check", [&] {
    const ExperimentConfig cfg = load(opts);
    const json report = check_report(cfg);
    out_stream(opts) << report.dump(2) << '\n';
    if (!opts.out.empty()) {
      std::filesystem::create_directories(opts.out);
      write_file(opts.out / "check.json", report.dump(2) + "\n");
    }
    return report["pass"].get<bool>() ? static_cast<int>(kExitOk) : static_cast<int>(kExitValidation);
  });
}

}  // namespace pushsum
