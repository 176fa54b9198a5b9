#include "cli_commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "propsynth/abstract.hpp"
#include "propsynth/distance.hpp"
#include "propsynth/oracle_suite.hpp"
#include "propsynth/serialize.hpp"
#include "propsynth/synth.hpp"

namespace propsynth::cli {

namespace {

using nlohmann::json;

void require_prob(double p, const std::string& name) {
  if (p < 0.0 || p > 1.0) throw ParseError("config: " + name + " must be in [0,1]");
}

void parse_catalog(const json& j, CatalogConfig& cat) {
  if (j.contains("kernels")) cat.kernels = j.at("kernels").get<std::vector<std::int64_t>>();
  if (j.contains("pool_windows")) cat.pool_windows = j.at("pool_windows").get<std::vector<std::int64_t>>();
  if (j.contains("features_absolute"))
    cat.features_absolute = j.at("features_absolute").get<std::vector<std::int64_t>>();
  if (j.contains("feature_ratios")) {
    cat.feature_ratios.clear();
    for (const auto& r : j.at("feature_ratios"))
      cat.feature_ratios.push_back({r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>()});
  }
  if (j.contains("group_counts")) cat.group_counts = j.at("group_counts").get<std::vector<std::int64_t>>();
  if (j.contains("dilations")) cat.dilations = j.at("dilations").get<std::vector<std::int64_t>>();
  if (j.contains("reference_channels")) cat.reference_channels = j.at("reference_channels").get<std::int64_t>();
  auto flag = [&](const char* name, bool& out) {
    if (j.contains(name)) out = j.at(name).get<bool>();
  };
  flag("with_dense", cat.with_dense);
  flag("with_convolution", cat.with_convolution);
  flag("with_grouped", cat.with_grouped);
  flag("with_dilated", cat.with_dilated);
  flag("with_scalar_multiply", cat.with_scalar_multiply);
  flag("with_activations", cat.with_activations);
  flag("with_softmax", cat.with_softmax);
  flag("with_norms", cat.with_norms);
  flag("with_dropout", cat.with_dropout);
  flag("with_pooling", cat.with_pooling);
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream f(std::filesystem::path(dir) / name);
  if (!f) throw std::runtime_error("cannot write " + name + " under " + dir);
  return f;
}

}  // namespace

int log_level() {
  const char* v = std::getenv("PROPSYNTH_LOG");
  return v ? std::atoi(v) : 0;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config parse error at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  RunConfig cfg;
  try {
    if (j.contains("catalog")) parse_catalog(j.at("catalog"), cfg.catalog);
    cfg.evolve.synth.catalog = cfg.catalog;
    if (j.contains("mutation")) {
      const auto& m = j.at("mutation");
      auto get = [&](const char* k, double& out) {
        if (m.contains(k)) out = m.at(k).get<double>();
      };
      get("p_subgraph", cfg.evolve.p_subgraph);
      get("p_delete", cfg.evolve.p_delete);
      get("p_duplicate", cfg.evolve.p_duplicate);
      get("share_prob", cfg.evolve.share_prob);
      get("depth_keep_prob", cfg.evolve.depth_keep_prob);
      get("shape_keep_prob", cfg.evolve.shape_keep_prob);
      get("pairing_drop_prob", cfg.evolve.pairing_drop_prob);
      get("mean_subgraph_size", cfg.evolve.mean_subgraph_size);
      if (m.contains("retries")) cfg.evolve.mutation_retries = m.at("retries").get<int>();
    }
    if (j.contains("synthesis")) {
      const auto& s = j.at("synthesis");
      if (s.contains("max_steps")) cfg.evolve.synth.limits.max_steps = s.at("max_steps").get<int>();
      if (s.contains("enum_budget"))
        cfg.evolve.synth.limits.enum_budget = s.at("enum_budget").get<std::int64_t>();
    }
    if (j.contains("evolution")) {
      const auto& e = j.at("evolution");
      if (e.contains("trials")) cfg.evolve.trials = e.at("trials").get<int>();
      if (e.contains("k_percent")) cfg.evolve.k_percent = e.at("k_percent").get<double>();
      if (e.contains("max_nodes")) cfg.evolve.max_nodes = e.at("max_nodes").get<int>();
      if (e.contains("secondary_objectives"))
        cfg.evolve.secondary_objectives = e.at("secondary_objectives").get<std::vector<std::string>>();
    }
    if (j.contains("evaluator")) cfg.evaluator = j.at("evaluator").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config malformed: ") + e.what());
  }
  if (cfg.evaluator != "surrogate")
    throw ParseError("config: unknown evaluator '" + cfg.evaluator + "' (only 'surrogate' ships)");
  require_prob(cfg.evolve.p_subgraph, "p_subgraph");
  require_prob(cfg.evolve.p_delete, "p_delete");
  require_prob(cfg.evolve.p_duplicate, "p_duplicate");
  require_prob(cfg.evolve.share_prob, "share_prob");
  require_prob(cfg.evolve.depth_keep_prob, "depth_keep_prob");
  require_prob(cfg.evolve.shape_keep_prob, "shape_keep_prob");
  require_prob(cfg.evolve.pairing_drop_prob, "pairing_drop_prob");
  if (cfg.evolve.k_percent <= 0.0 || cfg.evolve.k_percent > 100.0)
    throw ParseError("config: k_percent must be in (0,100]");
  return cfg;
}

int cmd_infer(const std::string& graph_file, const std::string& format) {
  ComputationGraph g;
  try {
    g = load_graph_file(graph_file);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  const auto rep = validate(g);
  if (!rep.ok()) {
    std::cerr << "error: graph fails validation\n" << rep.render();
    return kInputError;
  }
  if (format == "dot") {
    std::cout << to_dot(g);
    return kOk;
  }
  const auto props = infer_graph_properties(g);
  if (format == "csv") {
    std::cout << "input,output,depth,shape,mixing\n";
    for (const auto& [io, state] : props)
      std::cout << io.first << "," << io.second << "," << state.depth.count << ","
                << state.shape.str() << "," << state.mixing.letters() << "\n";
    return kOk;
  }
  if (format != "text") {
    std::cerr << "error: unknown format '" << format << "' (text|dot|csv)\n";
    return kInputError;
  }
  for (const auto& [io, state] : props) {
    std::cout << "input " << io.first << " -> output " << io.second << "\n";
    std::cout << render_property_state(state) << "\n";
  }
  return kOk;
}

int cmd_synth(const std::string& target_file, const RunConfig& cfg, std::uint64_t seed,
              const std::string& out_dir) {
  SynthesisTask task;
  try {
    std::ifstream f(target_file);
    if (!f) throw ParseError("cannot open target file: " + target_file);
    json j = json::parse(f, nullptr, true);
    task.input_shape.dims = j.at("input_shape").get<std::vector<std::int64_t>>();
    if (!task.input_shape.valid()) throw ParseError("target: invalid input_shape");
    const auto& t = j.at("target");
    if (t.contains("depth")) task.target.depth = t.at("depth").get<int>();
    if (t.contains("shape")) {
      TensorShape s;
      s.dims = t.at("shape").get<std::vector<std::int64_t>>();
      task.target.shape = s;
    }
    if (t.contains("mixing")) {
      MixingMatrix m;
      if (!MixingMatrix::from_letters(t.at("mixing").get<std::string>(), m))
        throw ParseError("target: bad mixing letters (rows of x/o/m/a joined by '|')");
      task.target.mixing = m;
    }
    if (!task.target.any()) throw ParseError("target: at least one of mixing/depth/shape required");
    if (j.contains("original_size")) task.limits.original_size = j.at("original_size").get<int>();
  } catch (const json::exception& e) {
    std::cerr << "error: target file malformed: " << e.what() << "\n";
    return kInputError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  CatalogConfig cat = cfg.catalog;
  cat.reference_channels = task.input_shape.channels();
  const auto catalog = op_catalog(cat);
  const auto classes = compress_catalog(catalog, task.input_shape);
  task.catalog = class_representatives(classes);
  task.limits.max_steps = cfg.evolve.synth.limits.max_steps;

  if (log_level() >= 1)
    std::cerr << "[synth] catalog " << catalog.size() << " ops, " << task.catalog.size()
              << " representatives, target " << task.target.summary() << "\n";
  Rng rng(seed);
  auto res = stochastic_synthesize(task, rng);
  if (res.outcome == SynthOutcome::Infeasible) {
    std::cerr << "infeasible: no finite-distance path to the target\n";
    return kInfeasible;
  }
  if (res.outcome == SynthOutcome::Failed) {
    std::cerr << "synthesis failed: " << res.failure_reason << "\n";
    return kSynthesisFailed;
  }
  const auto final_ops = diversify(res.ops, classes, rng);

  auto trace = open_out(out_dir, "trace.txt");
  DistanceEvaluator ev(task.target, task.catalog, task.input_shape);
  PropertyState state = identity_state(task.input_shape);
  trace << "target " << task.target.summary() << "\n";
  trace << "init d_mixing=" << ev.mixing_component(state).str()
        << " d_depth=" << ev.depth_component(state).str()
        << " d_shape=" << ev.shape_component(state).str() << " d_total=" << ev.total(state).str()
        << "\n";
  for (std::size_t i = 0; i < res.ops.size(); ++i) {
    state = *append_abstract(state, res.ops[i]);
    trace << "step " << i + 1 << ": " << res.ops[i].display()
          << " d_mixing=" << ev.mixing_component(state).str()
          << " d_depth=" << ev.depth_component(state).str()
          << " d_shape=" << ev.shape_component(state).str() << " d_total=" << ev.total(state).str()
          << "\n";
  }
  save_graph_file(chain_graph(task.input_shape, final_ops),
                  (std::filesystem::path(out_dir) / "synthesized.json").string());
  std::cout << "satisfied in " << res.ops.size() << " steps ("
            << res.accounting.distance_evaluations << " distance evaluations)\n";
  return kOk;
}

int cmd_evolve(const std::string& seed_graph_file, const RunConfig& cfg, std::uint64_t seed,
               const std::string& out_dir) {
  ComputationGraph g;
  try {
    g = load_graph_file(seed_graph_file);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  const auto rep = validate(g);
  if (!rep.ok()) {
    std::cerr << "error: seed graph fails validation\n" << rep.render();
    return kInputError;
  }
  EvolveConfig ecfg = cfg.evolve;
  ecfg.synth.catalog = cfg.catalog;
  if (log_level() >= 1)
    std::cerr << "[evolve] trials " << ecfg.trials << " k% " << ecfg.k_percent << " seed " << seed
              << "\n";
  Rng rng(seed);
  const auto history = evolve(g, make_default_evaluator(seed), ecfg, rng);

  for (const auto& t : history.trials)
    std::cout << "trial " << t.trial << " parent=" << t.parent
              << (t.produced ? " individual=" + std::to_string(t.individual) : " (no individual)")
              << " " << t.note << "\n";

  auto hist = open_out(out_dir, "history.jsonl");
  hist << history_to_jsonl(history);
  for (const auto& ind : history.individuals)
    save_graph_file(ind.graph,
                    (std::filesystem::path(out_dir) / ("graph_" + std::to_string(ind.id) + ".json")).string());
  for (const auto& sec : ecfg.secondary_objectives) {
    auto csv = open_out(out_dir, "pareto_" + sec + ".csv");
    csv << pareto_front_csv(history, {ecfg.primary_objective, sec});
  }
  std::cout << "evolved " << history.individuals.size() << " individuals over "
            << history.trials.size() << " trials\n";
  return kOk;
}

int cmd_oracle_check(const RunConfig& cfg, const std::string& corrupt_op_kind, bool parallel) {
  OracleSuiteOptions opt;
  opt.catalog = cfg.catalog;
  opt.corrupt_op_kind = corrupt_op_kind;
  opt.policy = parallel ? ExecPolicy::Parallel : ExecPolicy::Serial;
  const auto rep = run_oracle_suite(opt);
  std::cout << rep.render();
  return rep.ok() ? kOk : kOracleViolation;
}

}  // namespace propsynth::cli
