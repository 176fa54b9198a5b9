#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "propsynth/abstract.hpp"
#include "propsynth/graph.hpp"
#include "propsynth/rng.hpp"
#include "propsynth/synth.hpp"

namespace propsynth {

struct Metrics {
  double accuracy_proxy = 0.0;   // maximize
  double flops = 0.0;            // minimize
  double params = 0.0;           // minimize
  double throughput_proxy = 0.0; // maximize
};

double metric_value(const Metrics& m, const std::string& objective);
bool objective_maximizes(const std::string& objective);

struct MutationRecord {
  std::string kind;   // "seed", "subgraph", "block-delete", "block-duplicate"
  std::string detail;
};

struct Individual {
  std::int64_t id = 0;
  std::int64_t parent = -1;
  ComputationGraph graph;
  Metrics metrics;
  MutationRecord mutation;
};

struct EvolveConfig {
  int trials = 200;
  double k_percent = 25.0;
  double p_subgraph = 0.8, p_delete = 0.1, p_duplicate = 0.1;
  double share_prob = 0.5;
  double depth_keep_prob = 0.5;
  double shape_keep_prob = 0.5;
  double pairing_drop_prob = 0.5;
  int mutation_retries = 3;
  int max_nodes = 256;
  double mean_subgraph_size = 3.0;
  std::string primary_objective = "accuracy_proxy";
  std::vector<std::string> secondary_objectives{"flops", "params", "throughput_proxy"};
  SynthConfig synth;
};

// Closed-form flops / parameter counts (multiply-adds counted as 2 flops,
// biases included in the parameter count).
struct CostEstimate {
  double flops = 0.0;
  double params = 0.0;
};
CostEstimate static_cost_model(const ComputationGraph& g);

// Deterministic training-free accuracy stand-in: rises with depth and with
// all-to-one mixing coverage at the outputs, sags with parameter count, plus
// tiny seeded noise. Swappable through the Evaluator interface.
double surrogate_accuracy(const ComputationGraph& g, std::uint64_t seed);

using Evaluator = std::function<Metrics(const ComputationGraph&, std::int64_t individual_id)>;
Evaluator make_default_evaluator(std::uint64_t seed);

// Property mutation toward relaxed targets: depth kept with 50% probability
// else shifted by up to +-2 (clamped at 0), shape requirement kept or dropped
// by a coin, off-diagonal mixing pairings each dropped with 50% probability.
TargetSpec mutate_properties(const PropertyState& props, Rng& rng, const EvolveConfig& cfg);

// One architecture mutation: subgraph replacement (propagated to same-type
// blocks with share_prob), block deletion, or block duplication. nullopt when
// synthesis fails or the result does not validate. The returned individual
// carries the graph and mutation record; id/parent/metrics are filled by the
// evolve loop.
std::optional<Individual> mutate_individual(const Individual& parent, Rng& rng,
                                            const EvolveConfig& cfg);

struct ParetoContext {
  bool flat_secondary = false;                 // degenerate: rank by primary only
  std::vector<std::pair<double, double>> curve;  // canonical min-min space, sorted by x
  double y_scale = 1.0;                        // 1 / |endpoint slope|
};

struct ObjectivePair {
  std::string primary;
  std::string secondary;
};

ParetoContext build_pareto_context(const std::vector<Metrics>& points, const ObjectivePair& obj);

// Shortest normalized l2 distance to the interpolated Pareto curve; exactly 0
// for non-dominated points. Degenerate single-point curves use the L1 gap.
double pareto_weight(const Metrics& point, const std::vector<Metrics>& population,
                     const ObjectivePair& obj);
// Same weight against a prebuilt context (one curve per selection round).
double pareto_weight(const Metrics& point, const std::vector<Metrics>& population,
                     const ObjectivePair& obj, const ParetoContext& ctx);

struct SelectionTrace {
  std::string secondary;
  std::vector<std::size_t> top;  // indices eligible for the uniform draw
};

// Appendix-style selection: draw a secondary objective, build the Pareto
// context, keep the top k% by weight, return a uniform member.
std::size_t select(const std::vector<Individual>& population, const std::string& primary,
                   const std::vector<std::string>& secondaries, double k_percent, Rng& rng,
                   SelectionTrace* trace = nullptr);

struct TrialRecord {
  int trial = 0;
  std::int64_t parent = -1;
  bool produced = false;
  std::int64_t individual = -1;
  std::string note;
};

struct PopulationHistory {
  std::vector<Individual> individuals;  // id == index; never pruned
  std::vector<TrialRecord> trials;
};

// Deterministic function of (seed graph, cfg, rng seed, evaluator): seeds the
// population with two evaluations of the base graph, then runs `trials`
// select -> mutate -> evaluate -> insert rounds. Failed mutations consume a
// trial; evaluator exceptions drop the individual with a logged cause.
PopulationHistory evolve(const ComputationGraph& seed_graph, const Evaluator& evaluator,
                         const EvolveConfig& cfg, Rng& rng);

std::vector<std::size_t> pareto_front(const std::vector<Individual>& individuals,
                                      const ObjectivePair& obj);

// Append-only history lines ({trial, parent, mutation, metrics, graph ref}).
std::string history_to_jsonl(const PopulationHistory& h);
std::string pareto_front_csv(const PopulationHistory& h, const ObjectivePair& obj);

}  // namespace propsynth
