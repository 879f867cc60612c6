#include "pushsum/config.hpp"
#include "pushsum/engine.hpp"
#include "pushsum/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace pushsum;

namespace {

GraphSchedule alternating_schedule() {
  return GraphSchedule({DiGraph(4, {{0, 1}, {1, 2}, {1, 3}}), DiGraph(4, {{3, 1}, {3, 0}, {2, 3}})},
                       CyclicSelector{}, 2);
}

GraphSchedule single_node() { return GraphSchedule({DiGraph::isolated(1)}, CyclicSelector{}, 1); }

std::vector<Vector> scalars(std::initializer_list<double> xs) {
  std::vector<Vector> out;
  for (double x : xs) out.push_back(Vector::Constant(1, x));
  return out;
}

RunConfig averaging_config(std::vector<Vector> x0) {
  return RunConfig{.problems = quadratic_problems(std::vector<Vector>(4, Vector::Zero(1))),
                   .schedule = alternating_schedule(),
                   .params = custom_power_schedule(0.0, 0.0, 1.0, 0.0),
                   .x0 = std::move(x0)};
}

}  // namespace

TEST_CASE("initial state copies x0 into w and z with unit weights") {
  RunConfig cfg{.problems = toy_problems(1), .schedule = single_node(), .params = power_law_schedule(0.2),
                .x0 = scalars({5.0})};
  const Engine e = init_run(cfg);
  CHECK(e.agents()[0].y == 1.0);
  CHECK(e.agents()[0].z[0] == 5.0);
  CHECK(e.agents()[0].w[0] == 5.0);
  CHECK(e.mass_invariants().sum_y == 1.0);
}

TEST_CASE("equal starting values give zero disagreement") {
  const RunConfig cfg = averaging_config(scalars({2.0, 2.0, 2.0, 2.0}));
  const Engine e = init_run(cfg);
  CHECK(e.disagreement() == 0.0);
  CHECK(e.mass_invariants().sum_y == 4.0);
}

TEST_CASE("one mixing round equals the dense mixing-matrix product") {
  const RunConfig cfg = averaging_config(scalars({1.0, -2.0, 4.0, 8.0}));
  Engine e = init_run(cfg);
  e.step();
  const Eigen::MatrixXd A = mixing_matrix(alternating_schedule().at(0));
  Eigen::Vector4d x0(1.0, -2.0, 4.0, 8.0);
  const Eigen::Vector4d w = A * x0;
  const Eigen::Vector4d y = A * Eigen::Vector4d::Ones();
  // Hand values: node 1 keeps half of x_0 plus a third of its own value.
  CHECK(w[1] == doctest::Approx(0.5 * 1.0 + (-2.0) / 3.0));
  CHECK(y[3] == doctest::Approx(1.0 / 3.0 + 1.0));
  for (int i = 0; i < 4; ++i) {
    CHECK(e.agents()[i].w[0] == doctest::Approx(w[i]).epsilon(1e-15));
    CHECK(e.agents()[i].y == doctest::Approx(y[i]).epsilon(1e-15));
    CHECK(e.agents()[i].z[0] == doctest::Approx(w[i] / y[i]).epsilon(1e-15));
  }
}

TEST_CASE("single agent reduces to penalized gradient descent") {
  RunConfig cfg{.problems = toy_problems(1), .schedule = single_node(),
                .params = custom_power_schedule(0.1, 0.0, 1.0, 0.0), .x0 = scalars({0.0})};
  Engine e = init_run(cfg);
  double x = 0.0;
  for (int t = 0; t < 50; ++t) {
    e.step();
    const double u = 1.0 - x;
    const double psi_grad = u > 0 ? -std::tanh(u) : 0.0;
    x = x - 0.1 * (2.0 * x + psi_grad);
    CHECK(e.agents()[0].x[0] == doctest::Approx(x).epsilon(1e-14));
    CHECK(e.agents()[0].y == 1.0);
  }
}

TEST_CASE("total weight and the average dynamics are conserved") {
  RunConfig cfg{.problems = quadratic_problems({Vector::Constant(2, 1.0), Vector::Constant(2, -1.0),
                                                Vector::Constant(2, 3.0), Vector::Constant(2, 0.5)}),
                .schedule = alternating_schedule(),
                .params = power_law_schedule(0.2)};
  Engine e = init_run(cfg);
  for (int t = 0; t < 200; ++t) {
    const Vector before = e.mass_invariants().sum_x;
    e.step();
    Vector expected = before;
    for (const auto& g : e.last_gradients()) expected -= e.last_step_size() * g;
    CHECK((e.mass_invariants().sum_x - expected).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(std::abs(e.mass_invariants().sum_y - 4.0) < 1e-12);
    for (const auto& a : e.agents()) CHECK(a.y > 0.0);
  }
}

TEST_CASE("printed-variant flag changes the trajectory") {
  auto make = [](bool literal) {
    return RunConfig{.problems = toy_problems(4), .schedule = alternating_schedule(), .params = power_law_schedule(0.2),
                     .x0 = {}, .max_rounds = 50, .record_every = 50, .descend_from_stale_w = literal};
  };
  const RunConfig a = make(false), b = make(true);
  CHECK(run(a).rows.back().avg_iterate[0] != run(b).rows.back().avg_iterate[0]);
}

TEST_CASE("runs are deterministic and thread count does not change results") {
  auto make = [](unsigned threads) {
    return RunConfig{.problems = toy_problems(4), .schedule = alternating_schedule(), .params = power_law_schedule(0.2),
                     .x0 = {}, .max_rounds = 300, .record_every = 7, .threads = threads};
  };
  const RunConfig one = make(1), four = make(4);
  const auto a = run(one), b = run(one), c = run(four);
  REQUIRE(a.rows.size() == b.rows.size());
  REQUIRE(a.rows.size() == c.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].disagreement == b.rows[i].disagreement);
    CHECK(a.rows[i].avg_iterate == b.rows[i].avg_iterate);
    CHECK(a.rows[i].avg_iterate == c.rows[i].avg_iterate);
    CHECK(a.rows[i].mean_penalty == c.rows[i].mean_penalty);
  }
}

TEST_CASE("rows are recorded every record_every rounds and at the end") {
  const RunConfig cfg{.problems = toy_problems(4), .schedule = alternating_schedule(), .params = power_law_schedule(0.2),
                      .x0 = {}, .max_rounds = 95, .record_every = 10};
  const auto m = run(cfg);
  REQUIRE(m.rows.size() == 10);
  CHECK(m.rows.front().round == 10);
  CHECK(m.rows[8].round == 90);
  CHECK(m.rows.back().round == 95);
  CHECK(m.rounds_completed == 95);
  CHECK(m.warnings.empty());
  for (const auto& r : m.rows) CHECK(r.walltime_ms == 0.0);
}

TEST_CASE("tolerance stop ends a converged averaging run early") {
  RunConfig cfg = averaging_config(scalars({1.0, 2.0, 3.0, 4.0}));
  cfg.max_rounds = 10000;
  cfg.stop_tolerance = 1e-9;
  const auto m = run(cfg);
  CHECK(m.stopped_early);
  CHECK(m.rounds_completed < 10000);
  CHECK(m.rows.back().disagreement < 1e-9);
}

TEST_CASE("uncertified schedules produce a warning, not an error") {
  const RunConfig cfg{.problems = toy_problems(4),
                      .schedule = GraphSchedule({DiGraph(4, {{0, 1}, {1, 2}, {1, 3}})}, CyclicSelector{}),
                      .params = power_law_schedule(0.2), .x0 = {}, .max_rounds = 10};
  const auto m = run(cfg);
  CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("configuration errors are rejected before any round") {
  RunConfig wrong_count{.problems = toy_problems(3), .schedule = alternating_schedule(), .params = power_law_schedule(0.2)};
  CHECK_THROWS_AS(init_run(wrong_count), ValidationError);
  RunConfig wrong_x0{.problems = toy_problems(4), .schedule = alternating_schedule(), .params = power_law_schedule(0.2),
                     .x0 = std::vector<Vector>(4, Vector::Zero(2))};
  CHECK_THROWS_AS(init_run(wrong_x0), ValidationError);
}

TEST_CASE("a non-finite gradient aborts the run") {
  LocalProblem p;
  p.dim = 1;
  p.objective_value = [](const Vector&) { return 0.0; };
  p.objective_grad = [](const Vector&) -> Vector { return Vector::Constant(1, std::numeric_limits<double>::quiet_NaN()); };
  RunConfig cfg{.problems = {PenalizedProblem(p)}, .schedule = single_node(), .params = power_law_schedule(0.2)};
  Engine e = init_run(cfg);
  CHECK_THROWS_AS(e.step(), RuntimeFailure);
}

TEST_CASE("averaging on a static complete graph reaches the initial mean") {
  const RunConfig cfg{.problems = quadratic_problems(std::vector<Vector>(4, Vector::Zero(1))),
                      .schedule = GraphSchedule({DiGraph::complete(4)}, CyclicSelector{}, 1),
                      .params = custom_power_schedule(0.0, 0.0, 1.0, 0.0),
                      .x0 = scalars({3.0, -7.0, 0.5, 9.25})};
  Engine e = init_run(cfg);
  for (int t = 0; t < 50; ++t) e.step();
  for (const auto& a : e.agents()) CHECK(std::abs(a.z[0] - 1.4375) <= 1e-9);
  CHECK(e.mass_invariants().sum_x[0] == doctest::Approx(5.75).epsilon(1e-14));
}

TEST_CASE("a common feasible minimizer with zero step is a fixed point") {
  RunConfig cfg{.problems = toy_problems(4), .schedule = alternating_schedule(),
                .params = custom_power_schedule(0.0, 0.0, 1.0, 0.0), .x0 = scalars({1.0, 1.0, 1.0, 1.0}),
                .max_rounds = 100, .record_every = 10};
  const auto m = run(cfg);
  for (const auto& r : m.rows) {
    CHECK(r.disagreement == 0.0);
    CHECK(r.mean_penalty == 0.0);
    CHECK(r.objective == doctest::Approx(m.rows.front().objective).epsilon(1e-14));
  }
}

TEST_CASE("single-agent constrained toy approaches the boundary optimum") {
  const RunConfig cfg{.problems = toy_problems(1), .schedule = single_node(),
                      .params = power_law_schedule(0.2, {0.1, 200.0}), .x0 = {}, .max_rounds = 100000,
                      .record_every = 100000};
  const auto m = run(cfg);
  CHECK(std::abs(m.final_agents[0].z[0] - 1.0) <= 1e-2);
}
