#include "pushsum/commands.hpp"
#include "pushsum/config.hpp"
#include "pushsum/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace pushsum;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json toy_doc() {
  return json::parse(R"({
    "version": 1,
    "seed": 4,
    "problem": {"type": "toy", "agents": 4},
    "graph": {"nodes": 4, "graphs": [[[0, 1], [1, 2], [1, 3]], [[3, 1], [3, 0], [2, 3]]],
              "selector": "alternate", "claimed_B": 2},
    "schedule": {"family": "power_law", "b": 0.2, "step_scale": 0.1, "penalty_scale": 100.0},
    "run": {"max_rounds": 2000, "record_every": 100},
    "oracle": {"grid": 41, "refine": 6}
  })");
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("pushsum_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const json& doc) const {
    std::ofstream(path / name) << doc.dump(2);
    return path / name;
  }
};

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Captured {
  std::ostringstream out, err;
  CommandOptions opts(const fs::path& config, const fs::path& out_dir) {
    CommandOptions o;
    o.config = config;
    o.out = out_dir;
    o.report = &out;
    o.log = &err;
    return o;
  }
};

}  // namespace

TEST_CASE("config parsing accepts the toy document") {
  const auto cfg = parse_config(toy_doc());
  CHECK(cfg.problem_type == "toy");
  CHECK(cfg.run.problems.size() == 4);
  CHECK(cfg.run.max_rounds == 2000);
  CHECK(cfg.run.schedule.claimed_B() == 2);
  CHECK(cfg.seed == 4);
}

TEST_CASE("unknown fields and wrong versions are rejected") {
  auto doc = toy_doc();
  doc["run"]["max_round"] = 10;
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc = toy_doc();
  doc["extra"] = true;
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc = toy_doc();
  doc["version"] = 2;
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
}

TEST_CASE("selector strings are parsed and validated") {
  auto doc = toy_doc();
  doc["graph"]["selector"] = "seeded-random(0.5, 9)";
  doc["graph"].erase("claimed_B");
  auto sel = std::get<SeededRandomSelector>(parse_config(doc).run.schedule.selector());
  CHECK(sel.activity == 0.5);
  CHECK(sel.seed == 9);
  doc["graph"]["selector"] = "seeded-random(0.25)";
  sel = std::get<SeededRandomSelector>(parse_config(doc, 77).run.schedule.selector());
  CHECK(sel.seed == 77);
  doc["graph"]["selector"] = "seeded-random(1.5)";
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc["graph"]["selector"] = "sometimes";
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc = toy_doc();
  doc["graph"]["graphs"].push_back("complete");
  CHECK_THROWS_AS(parse_config(doc), ValidationError);  // alternate needs two graphs
}

TEST_CASE("random starting points follow the seed") {
  auto doc = toy_doc();
  doc["run"]["x0"] = {{"uniform", {-10, 10}}};
  const auto a = parse_config(doc), b = parse_config(doc), c = parse_config(doc, 99);
  REQUIRE(a.run.x0.size() == 4);
  CHECK(a.run.x0[2] == b.run.x0[2]);
  CHECK(a.run.x0[2] != c.run.x0[2]);
  for (const auto& x : a.run.x0) CHECK(std::abs(x[0]) <= 10.0);
}

TEST_CASE("mismatched node count is a validation error") {
  auto doc = toy_doc();
  doc["problem"]["agents"] = 3;
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
}

TEST_CASE("missing config exits with the validation code and writes nothing") {
  TempDir dir;
  Captured cap;
  const auto out = dir.path / "out";
  CHECK(cmd_run(cap.opts(dir.path / "absent.json", out)) == kExitValidation);
  CHECK_FALSE(fs::exists(out));
  CHECK(cap.err.str().find("absent.json") != std::string::npos);
}

TEST_CASE("inadmissible exponent is rejected naming the increment clause") {
  TempDir dir;
  auto doc = toy_doc();
  doc["schedule"]["b"] = 0.5;
  Captured cap;
  const auto out = dir.path / "out";
  CHECK(cmd_run(cap.opts(dir.write("bad.json", doc), out)) == kExitValidation);
  CHECK(cap.err.str().find("(iv)") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("run writes metrics, final state and relative errors") {
  TempDir dir;
  const auto cfg = dir.write("toy.json", toy_doc());
  Captured cap;
  auto opts = cap.opts(cfg, dir.path / "out");
  const auto oracle_file = dir.write("oracle.json", json{{"solution", {1.0}}});
  opts.oracle_solution = oracle_file;
  REQUIRE(cmd_run(opts) == kExitOk);
  const std::string metrics = read(dir.path / "out" / "metrics.csv");
  CHECK(metrics.rfind("round,disagreement,mean_penalty,objective,walltime_ms,x_bar_0\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 2000 / 100);
  CHECK(metrics.find('\r') == std::string::npos);
  const json fin = json::parse(read(dir.path / "out" / "final.json"));
  CHECK(fin["agents"].size() == 4);
  CHECK(fin["rounds_completed"] == 2000);
  const std::string rel = read(dir.path / "out" / "relative_error.csv");
  CHECK(rel.rfind("round,x_0\n", 0) == 0);
}

TEST_CASE("two runs of one config write identical metrics") {
  TempDir dir;
  const auto cfg = dir.write("toy.json", toy_doc());
  Captured cap;
  REQUIRE(cmd_run(cap.opts(cfg, dir.path / "a")) == kExitOk);
  REQUIRE(cmd_run(cap.opts(cfg, dir.path / "b")) == kExitOk);
  CHECK(read(dir.path / "a" / "metrics.csv") == read(dir.path / "b" / "metrics.csv"));
}

TEST_CASE("check passes with B = 2 and fails with B = 1") {
  TempDir dir;
  Captured pass_cap, fail_cap;
  CHECK(cmd_check(pass_cap.opts(dir.write("b2.json", toy_doc()), {})) == kExitOk);
  const json report = json::parse(pass_cap.out.str());
  CHECK(report["graph"]["verify_B"].get<bool>());
  CHECK(report["schedule"]["accepted"].get<bool>());
  auto doc = toy_doc();
  doc["graph"]["claimed_B"] = 1;
  CHECK(cmd_check(fail_cap.opts(dir.write("b1.json", doc), {})) == kExitValidation);
  CHECK_FALSE(json::parse(fail_cap.out.str())["graph"]["verify_B"].get<bool>());
}

TEST_CASE("oracle solves the toy and reports the penalty path") {
  TempDir dir;
  auto doc = toy_doc();
  doc["problem"]["agents"] = 1;
  doc["graph"] = {{"nodes", 1}, {"graphs", json::array({json::array()})}, {"claimed_B", 1}};
  doc["schedule"]["penalty_scale"] = 200.0;
  doc["run"]["max_rounds"] = 100000;
  Captured cap;
  REQUIRE(cmd_oracle(cap.opts(dir.write("toy1.json", doc), dir.path / "out")) == kExitOk);
  const json r = json::parse(read(dir.path / "out" / "oracle.json"));
  CHECK(std::abs(r["solution"][0].get<double>() - 1.0) < 1e-2);
  CHECK(r["agreement"]["pass"].get<bool>());
  CHECK(r["penalty_path"].size() == 4);
}

TEST_CASE("oracle rejects an instance without enough demand capacity") {
  TempDir dir;
  json doc = toy_doc();
  doc["problem"] = json::parse(R"({"type": "energy",
    "generators": [{"name": "G1", "a": 0.04, "b": 2.9, "c": 1, "loss": 0.0003, "p_min": 120, "p_max": 150},
                   {"name": "G2", "a": 0.03, "b": 3.0, "c": 1, "loss": 0.0003, "p_min": 120, "p_max": 200}],
    "demands": [{"name": "D1", "omega": 60, "alpha": 0.25, "K": 1.1, "p_min": 20, "p_max": 50},
                {"name": "D2", "omega": 16, "alpha": 0.05, "K": 4, "p_min": 20, "p_max": 50}]})");
  Captured cap;
  CHECK(cmd_oracle(cap.opts(dir.write("short.json", doc), dir.path / "out")) == kExitValidation);
  CHECK(cap.err.str().find("demand capacity") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "out"));
}

TEST_CASE("thread cap from the environment") {
  ::setenv("PUSHSUM_THREADS", "2", 1);
  CHECK(effective_threads(8) == 2);
  CHECK(effective_threads(1) == 1);
  ::setenv("PUSHSUM_THREADS", "junk", 1);
  CHECK(effective_threads(8) == 8);
  ::unsetenv("PUSHSUM_THREADS");
}

TEST_CASE("emitted config source re-validates") {
  const auto cfg = parse_config(toy_doc(), 5);
  const auto again = parse_config(json::parse(cfg.source.dump()));
  CHECK(again.seed == 5);
}
