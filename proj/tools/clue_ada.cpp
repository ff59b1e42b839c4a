// clue-ada: run Active Domain Adaptation experiments from a config file.
//
//   clue-ada run      --config exp.ini --out results/run.csv
//   clue-ada sweep    --config exp.ini --grid strategy.temperature=0.1,0.5,1,2 --out results/
//   clue-ada validate --config exp.ini

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clue/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Active domain adaptation with uncertainty-weighted clustering"};
  app.require_subcommand(1);

  std::vector<std::uint64_t> seeds;
  int threads = 0;
  app.add_option("--seed-override", seeds, "Replace experiment.seeds (comma separated)")
      ->delimiter(',');
  app.add_option("--threads", threads, "Seeds/grid points run in parallel (env CLUE_ADA_THREADS)");

  std::string config, out, grid;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config, "Config file")->required();
  run->add_option("--out", out, "Results CSV path")->required();

  auto* sweep = app.add_subcommand("sweep", "Run an experiment over a grid of one config key");
  sweep->add_option("--config", config, "Config file")->required();
  sweep->add_option("--grid", grid, "KEY=v1,v2,...")->required();
  sweep->add_option("--out", out, "Output directory")->required();

  auto* validate = app.add_subcommand("validate", "Check a config and print its normalized form");
  validate->add_option("--config", config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : clue::cli::kConfigError;
  }

  clue::cli::Options opts;
  if (!seeds.empty()) opts.seed_override = seeds;
  opts.threads = clue::cli::resolve_threads(threads > 0 ? std::optional<int>(threads) : std::nullopt);

  if (*run) return clue::cli::cmd_run(config, out, opts, std::cerr);
  if (*sweep) return clue::cli::cmd_sweep(config, grid, out, opts, std::cerr);
  return clue::cli::cmd_validate(config, opts, std::cout, std::cerr);
}
