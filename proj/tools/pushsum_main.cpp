#include "pushsum/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Penalty-based push-sum optimization over time-varying directed graphs"};
  app.require_subcommand(1);

  pushsum::CommandOptions opts;
  opts.report = &std::cout;
  opts.log = &std::cerr;
  std::string config, out, oracle_path;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", config, "experiment config (JSON)")->required();
    auto* o = sub->add_option("--out", out, "output directory");
    if (out_required) o->required();
    sub->add_option("--seed", seed, "override the config seed");
  };
  auto* run = app.add_subcommand("run", "simulate the push-sum network and write metrics");
  add_common(run, true);
  run->add_option("--oracle", oracle_path, "oracle.json used for relative_error.csv");
  auto* orc = app.add_subcommand("oracle", "solve the instance centrally and write oracle.json");
  add_common(orc, true);
  auto* check = app.add_subcommand("check", "validate graph schedule, parameters and instance");
  add_common(check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; every usage error maps onto the validation exit code.
    return app.exit(e) == 0 ? pushsum::kExitOk : pushsum::kExitValidation;
  }

  opts.config = config;
  opts.out = out;
  if (app.get_subcommands().front()->count("--seed") > 0) opts.seed = seed;
  if (!oracle_path.empty()) opts.oracle_solution = oracle_path;

  if (run->parsed()) return pushsum::cmd_run(opts);
  if (orc->parsed()) return pushsum::cmd_oracle(opts);
  return pushsum::cmd_check(opts);
}
