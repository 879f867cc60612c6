#include "pushsum/config.hpp"

#include "pushsum/errors.hpp"
#include "pushsum/json_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace pushsum {

using nlohmann::json;
using namespace json_util;

namespace {

const json& section(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(fmt::format("config: missing section '{}'", key));
  return *it;
}

Vector vector_from_json(const json& j, std::string_view where) {
  if (!j.is_array() || j.empty()) throw ValidationError(fmt::format("{}: expected a non-empty array of numbers", where));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number() || !std::isfinite(j[i].get<double>())) {
      throw ValidationError(fmt::format("{}[{}] must be a finite number", where, i));
    }
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Selector parse_selector(const std::string& s, std::size_t graph_count, std::uint64_t default_seed) {
  if (s == "round-robin" || s == "cyclic") return CyclicSelector{};
  if (s == "alternate") {
    if (graph_count != 2) throw ValidationError("graph: selector 'alternate' needs exactly two graphs");
    return CyclicSelector{};
  }
  static const std::regex random_form(R"(seeded-random\(\s*([0-9.eE+-]+)\s*(?:,\s*([0-9]+)\s*)?\))");
  std::smatch m;
  if (std::regex_match(s, m, random_form)) {
    SeededRandomSelector sel;
    try {
      sel.activity = std::stod(m[1].str());
      sel.seed = m[2].matched ? std::stoull(m[2].str()) : default_seed;
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("graph: cannot parse selector '{}'", s));
    }
    if (!(sel.activity > 0.0 && sel.activity <= 1.0)) {
      throw ValidationError("graph: seeded-random activity probability must lie in (0, 1]");
    }
    return sel;
  }
  throw ValidationError(
      fmt::format("graph: unknown selector '{}' (expected alternate, round-robin or seeded-random(p[, seed]))", s));
}

std::vector<Vector> parse_x0(const json& run, int agents, int dim, std::uint64_t seed) {
  const auto it = run.find("x0");
  if (it == run.end() || (it->is_string() && it->get<std::string>() == "zero")) return {};
  if (it->is_object()) {
    require_keys(*it, {"uniform"}, "run.x0");
    const auto& u = (*it)["uniform"];
    if (!u.is_array() || u.size() != 2 || !u[0].is_number() || !u[1].is_number() ||
        !(u[0].get<double>() < u[1].get<double>())) {
      throw ValidationError("run.x0.uniform must be [lo, hi] with lo < hi");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(u[0].get<double>(), u[1].get<double>());
    std::vector<Vector> x0;
    for (int i = 0; i < agents; ++i) {
      Vector v(dim);
      for (int k = 0; k < dim; ++k) v[k] = dist(rng);
      x0.push_back(std::move(v));
    }
    return x0;
  }
  if (it->is_array()) {
    if (static_cast<int>(it->size()) != agents) {
      throw ValidationError(fmt::format("run.x0 lists {} vectors for {} agents", it->size(), agents));
    }
    std::vector<Vector> x0;
    for (std::size_t i = 0; i < it->size(); ++i) {
      Vector v = vector_from_json((*it)[i], fmt::format("run.x0[{}]", i));
      if (v.size() != dim) throw ValidationError(fmt::format("run.x0[{}] must have dimension {}", i, dim));
      x0.push_back(std::move(v));
    }
    return x0;
  }
  throw ValidationError("run.x0 must be \"zero\", {\"uniform\": [lo, hi]} or a list of vectors");
}

OracleSettings parse_oracle(const json& doc) {
  OracleSettings o;
  const auto it = doc.find("oracle");
  if (it == doc.end()) return o;
  const json& j = *it;
  require_keys(j, {"grid", "refine", "penalty", "box", "centralized", "agreement_tol", "path_r"}, "oracle");
  if (j.contains("grid")) o.grid = static_cast<int>(count(j, "grid", "oracle"));
  if (j.contains("refine")) o.refine = static_cast<int>(count(j, "refine", "oracle"));
  if (auto p = optional_number(j, "penalty", "oracle")) o.penalty = *p;
  if (auto t = optional_number(j, "agreement_tol", "oracle")) o.agreement_tol = *t;
  if (o.grid < 2) throw ValidationError("oracle.grid must be at least 2");
  if (!(o.penalty >= 1.0)) throw ValidationError("oracle.penalty must be >= 1");
  if (!(o.agreement_tol >= 0.0)) throw ValidationError("oracle.agreement_tol must be >= 0");
  if (j.contains("box")) {
    std::vector<oracle::Interval> box;
    for (std::size_t k = 0; k < j["box"].size(); ++k) {
      const Vector iv = vector_from_json(j["box"][k], fmt::format("oracle.box[{}]", k));
      if (iv.size() != 2 || !(iv[0] <= iv[1])) {
        throw ValidationError(fmt::format("oracle.box[{}] must be [lo, hi] with lo <= hi", k));
      }
      box.push_back({iv[0], iv[1]});
    }
    o.box = std::move(box);
  }
  if (j.contains("centralized")) {
    const auto& c = j["centralized"];
    require_keys(c, {"rounds", "step", "penalty"}, "oracle.centralized");
    CentralizedSettings cs;
    cs.rounds = count(c, "rounds", "oracle.centralized");
    cs.step = number(c, "step", "oracle.centralized");
    cs.penalty = number(c, "penalty", "oracle.centralized");
    if (!(cs.step > 0.0) || !(cs.penalty >= 1.0)) {
      throw ValidationError("oracle.centralized needs step > 0 and penalty >= 1");
    }
    o.centralized = cs;
  }
  if (j.contains("path_r")) {
    const Vector r = vector_from_json(j["path_r"], "oracle.path_r");
    o.path_r.assign(r.data(), r.data() + r.size());
    for (std::size_t i = 0; i < o.path_r.size(); ++i) {
      if (!(o.path_r[i] >= 1.0) || (i > 0 && !(o.path_r[i] > o.path_r[i - 1]))) {
        throw ValidationError("oracle.path_r must be increasing and >= 1");
      }
    }
  }
  return o;
}

}  // namespace

std::vector<PenalizedProblem> quadratic_problems(const std::vector<Vector>& targets) {
  std::vector<PenalizedProblem> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Vector c = targets[i];
    LocalProblem p;
    p.objective_value = [c](const Vector& z) { return (z - c).squaredNorm(); };
    p.objective_grad = [c](const Vector& z) -> Vector { return 2.0 * (z - c); };
    p.dim = static_cast<int>(c.size());
    p.name = fmt::format("agent{}", i);
    out.emplace_back(std::move(p));
  }
  return out;
}

std::vector<PenalizedProblem> toy_problems(int agents) {
  if (agents < 1) throw ValidationError("toy problem needs at least one agent");
  std::vector<PenalizedProblem> out;
  const double share = 1.0 / agents;
  for (int i = 0; i < agents; ++i) {
    LocalProblem p;
    p.objective_value = [share](const Vector& z) { return share * z[0] * z[0]; };
    p.objective_grad = [share](const Vector& z) -> Vector { return Vector::Constant(1, 2.0 * share * z[0]); };
    p.constraints.push_back(affine_constraint(Vector::Constant(1, -1.0), 1.0, "z >= 1"));
    p.dim = 1;
    p.name = fmt::format("agent{}", i);
    out.emplace_back(std::move(p));
  }
  return out;
}

GraphSchedule parse_graph(const json& j, std::uint64_t default_seed) {
  require_keys(j, {"nodes", "graphs", "selector", "claimed_B"}, "graph");
  const auto nodes = static_cast<int>(count(j, "nodes", "graph"));
  if (nodes < 1) throw ValidationError("graph.nodes must be positive");
  if (!j.contains("graphs") || !j["graphs"].is_array() || j["graphs"].empty()) {
    throw ValidationError("graph.graphs must be a non-empty list of edge lists");
  }
  std::vector<DiGraph> graphs;
  for (std::size_t g = 0; g < j["graphs"].size(); ++g) {
    const auto& list = j["graphs"][g];
    if (list.is_string() && list.get<std::string>() == "complete") {
      graphs.push_back(DiGraph::complete(nodes));
      continue;
    }
    if (!list.is_array()) throw ValidationError(fmt::format("graph.graphs[{}] must be an edge list or \"complete\"", g));
    std::vector<Edge> edges;
    for (const auto& e : list) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
        throw ValidationError(fmt::format("graph.graphs[{}]: each edge must be [from, to]", g));
      }
      edges.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    try {
      graphs.emplace_back(nodes, edges);
    } catch (const std::invalid_argument& ex) {
      throw ValidationError(fmt::format("graph.graphs[{}]: {}", g, ex.what()));
    }
  }
  const Selector selector = parse_selector(j.contains("selector") ? text(j, "selector", "graph") : "round-robin",
                                           graphs.size(), default_seed);
  std::optional<int> claimed;
  if (j.contains("claimed_B")) claimed = static_cast<int>(count(j, "claimed_B", "graph"));
  try {
    return GraphSchedule(std::move(graphs), selector, claimed);
  } catch (const std::invalid_argument& ex) {
    throw ValidationError(fmt::format("graph: {}", ex.what()));
  }
}

ParamSchedule parse_schedule(const json& j) {
  const std::string family = text(j, "family", "schedule");
  if (family == "power_law") {
    require_keys(j, {"family", "b", "step_scale", "penalty_scale"}, "schedule");
    PowerLawScales scales;
    if (auto s = optional_number(j, "step_scale", "schedule")) scales.step_scale = *s;
    if (auto s = optional_number(j, "penalty_scale", "schedule")) scales.penalty_scale = *s;
    return power_law_schedule(number(j, "b", "schedule"), scales);
  }
  if (family == "custom") {
    require_keys(j, {"family", "step_scale", "step_exponent", "penalty_scale", "penalty_exponent"}, "schedule");
    return custom_power_schedule(number(j, "step_scale", "schedule"), number(j, "step_exponent", "schedule"),
                                 number(j, "penalty_scale", "schedule"), number(j, "penalty_exponent", "schedule"));
  }
  throw ValidationError(fmt::format("schedule: unknown family '{}' (expected power_law or custom)", family));
}

ExperimentConfig parse_config(const json& input, std::optional<std::uint64_t> seed_override) {
  json doc = input;
  require_keys(doc, {"version", "description", "seed", "problem", "graph", "schedule", "run", "oracle"}, "config");
  const auto version = count(doc, "version", "config");
  if (version != static_cast<std::uint64_t>(kConfigVersion)) {
    throw ValidationError(fmt::format("config: unsupported version {} (expected {})", version, kConfigVersion));
  }
  std::uint64_t seed = doc.contains("seed") ? count(doc, "seed", "config") : 0;
  if (seed_override) seed = *seed_override;
  doc["seed"] = seed;

  const json& pj = section(doc, "problem");
  const std::string type = text(pj, "type", "problem");
  std::vector<PenalizedProblem> problems;
  std::optional<energy::EnergyInstance> instance;
  std::vector<Vector> targets;
  if (type == "energy") {
    instance.emplace(energy::params_from_json(pj));
    problems = energy::build_distributed_problem(*instance);
  } else if (type == "quadratic") {
    require_keys(pj, {"type", "targets"}, "problem");
    if (!pj.contains("targets") || !pj["targets"].is_array() || pj["targets"].empty()) {
      throw ValidationError("problem.targets must be a non-empty list of vectors");
    }
    for (std::size_t i = 0; i < pj["targets"].size(); ++i) {
      targets.push_back(vector_from_json(pj["targets"][i], fmt::format("problem.targets[{}]", i)));
      if (targets.back().size() != targets.front().size()) {
        throw ValidationError("problem.targets must share one dimension");
      }
    }
    problems = quadratic_problems(targets);
  } else if (type == "toy") {
    require_keys(pj, {"type", "agents"}, "problem");
    problems = toy_problems(static_cast<int>(count(pj, "agents", "problem")));
  } else {
    throw ValidationError(fmt::format("problem: unknown type '{}' (expected energy, quadratic or toy)", type));
  }

  GraphSchedule graph = parse_graph(section(doc, "graph"), seed);
  if (graph.n() != static_cast<int>(problems.size())) {
    throw ValidationError(fmt::format("graph has {} nodes but the problem has {} agents", graph.n(), problems.size()));
  }
  ParamSchedule params = parse_schedule(section(doc, "schedule"));

  const json& rj = section(doc, "run");
  require_keys(rj, {"max_rounds", "record_every", "stop_tolerance", "descend_from_stale_w", "x0", "trace_agents",
                    "record_walltime", "threads"},
               "run");
  const int agents = static_cast<int>(problems.size());
  const int dim = problems.front().dim();
  std::vector<Vector> x0 = parse_x0(rj, agents, dim, seed);

  RunConfig run{.problems = std::move(problems), .schedule = std::move(graph), .params = std::move(params)};
  run.x0 = std::move(x0);
  if (rj.contains("max_rounds")) run.max_rounds = count(rj, "max_rounds", "run");
  if (rj.contains("record_every")) run.record_every = count(rj, "record_every", "run");
  if (run.record_every < 1) throw ValidationError("run.record_every must be >= 1");
  run.stop_tolerance = optional_number(rj, "stop_tolerance", "run");
  if (run.stop_tolerance && !(*run.stop_tolerance > 0.0)) throw ValidationError("run.stop_tolerance must be > 0");
  run.descend_from_stale_w = flag(rj, "descend_from_stale_w", false, "run");
  run.trace_agents = flag(rj, "trace_agents", false, "run");
  run.record_walltime = flag(rj, "record_walltime", false, "run");
  if (rj.contains("threads")) run.threads = static_cast<unsigned>(std::max<std::uint64_t>(1, count(rj, "threads", "run")));

  ExperimentConfig cfg{.seed = seed,
                       .problem_type = type,
                       .energy = std::move(instance),
                       .targets = std::move(targets),
                       .run = std::move(run),
                       .oracle = parse_oracle(doc),
                       .source = doc};
  if (cfg.oracle.box) {
    const auto expected = cfg.energy ? static_cast<std::size_t>(cfg.energy->node_count() - 1)
                                     : static_cast<std::size_t>(dim);
    if (cfg.oracle.box->size() != expected) {
      throw ValidationError(fmt::format("oracle.box needs {} intervals", expected));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ValidationError(fmt::format("config '{}' is not valid JSON: {}", path.string(), ex.what()));
  }
  return parse_config(doc, seed_override);
}

}  // namespace pushsum
