#include <CLI11.hpp>

#include <iostream>

#include "cli_commands.hpp"
#include "propsynth/serialize.hpp"

int main(int argc, char** argv) {
  using namespace propsynth::cli;
  CLI::App app{"propsynth: property-guided synthesis and evolution of tensor computation graphs"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", format = "text", graph_file, target_file;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string corrupt;
  bool parallel = true;

  auto add_common = [&](CLI::App* cmd, bool needs_seed) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--out", out_dir, "output directory");
    if (needs_seed) cmd->add_option("--seed", seed, "rng seed")->required()->each([&](const std::string&) {
      seed_given = true;
    });
  };

  auto* infer = app.add_subcommand("infer", "infer mixing/depth/shape properties of a graph file");
  infer->add_option("graph", graph_file, "graph file")->required();
  infer->add_option("--format", format, "text|dot");
  add_common(infer, false);

  auto* synth = app.add_subcommand("synth", "synthesize a chain satisfying a target file");
  synth->add_option("target", target_file, "target file")->required();
  add_common(synth, true);

  auto* evolve = app.add_subcommand("evolve", "run the evolutionary search from a seed graph");
  evolve->add_option("seed-graph", graph_file, "seed graph file")->required();
  add_common(evolve, true);

  auto* oracle = app.add_subcommand("oracle-check", "run the abstract-vs-concrete oracle suite");
  oracle->add_option("--inject-fault", corrupt, "corrupt the abstract table of this op kind (test mode)");
  oracle->add_flag("!--serial", parallel, "disable OpenMP parallelism");
  add_common(oracle, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (infer->parsed()) return cmd_infer(graph_file, format);
    if (synth->parsed()) return cmd_synth(target_file, cfg, seed, out_dir);
    if (evolve->parsed()) return cmd_evolve(graph_file, cfg, seed, out_dir);
    if (oracle->parsed()) return cmd_oracle_check(cfg, corrupt, parallel);
  } catch (const propsynth::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
