#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "propsynth/abstract.hpp"
#include "propsynth/distance.hpp"
#include "propsynth/ops.hpp"
#include "propsynth/parallel.hpp"
#include "propsynth/rng.hpp"
#include "propsynth/subgraph.hpp"

namespace propsynth {

struct SynthLimits {
  int max_steps = 64;
  // Length of the subgraph being replaced; 0 derives the target-implied lower
  // bound (depth target, else 1 when the task starts unsatisfied).
  int original_size = 0;
  std::int64_t enum_budget = 2000000;  // candidate sequences for the enumerative search
};

struct SynthesisTask {
  TensorShape input_shape;  // the initial program is the identity at this shape
  TargetSpec target;
  std::vector<PrimitiveOp> catalog;
  SynthLimits limits;
};

enum class SynthOutcome : std::uint8_t { Satisfied, Infeasible, Failed };

struct SynthesisResult {
  SynthOutcome outcome = SynthOutcome::Failed;
  std::string failure_reason;
  std::vector<PrimitiveOp> ops;
  struct Accounting {
    std::int64_t steps = 0;
    std::int64_t distance_evaluations = 0;
    std::vector<std::int64_t> distance_trace;  // d before step 1, then after each step
  } accounting;

  bool satisfied() const { return outcome == SynthOutcome::Satisfied; }
};

// Appends the argmin-distance op until the distance reaches 0 (ties broken by
// lowest catalog index). Exactly |catalog| distance evaluations per step.
SynthesisResult greedy_synthesize(const SynthesisTask& task, ExecPolicy policy = ExecPolicy::Serial);

// Samples ops with probability proportional to 1/(1+d) until the sequence
// reaches original_size, then runs greedy; fails if unsatisfied after two
// additional steps.
SynthesisResult stochastic_synthesize(const SynthesisTask& task, Rng& rng);

// Tries all sequences of size 1, 2, ... in random order; first hit is a
// minimum-length solution. distance_evaluations counts candidate sequences.
SynthesisResult enumerative_synthesize(const SynthesisTask& task, Rng& rng);

// Replays a result through append_abstract; true iff it ends satisfied.
bool replay_satisfies(const SynthesisTask& task, const std::vector<PrimitiveOp>& ops);

struct OpClass {
  PrimitiveOp representative;
  std::size_t representative_index = 0;  // into the original catalog
  std::vector<PrimitiveOp> members;
  std::string signature;
};

// Partitions the catalog into classes of ops with identical abstract
// semantics at every shape reachable from the working shape (probed over the
// catalog's own divisors and feature sizes), keyed additionally by op kind so
// each representative stands for variants of its own type.
std::vector<OpClass> compress_catalog(const std::vector<PrimitiveOp>& catalog,
                                      const TensorShape& working_shape);

std::vector<PrimitiveOp> class_representatives(const std::vector<OpClass>& classes);

// Replaces every op with a uniformly random member of its class. Class members
// share abstract semantics on every reachable shape, so the result satisfies
// whatever target the input satisfied.
std::vector<PrimitiveOp> diversify(const std::vector<PrimitiveOp>& ops,
                                   const std::vector<OpClass>& classes, Rng& rng);

struct SynthConfig {
  CatalogConfig catalog;  // reference_channels is overridden per chain
  SynthLimits limits;
};

// Per-chain property states of a decomposition (identity at the chain input).
std::vector<PropertyState> chain_property_states(const ComputationGraph& g,
                                                 const SubgraphSelection& sel,
                                                 const Decomposition& dec);

// Synthesized replacement ops, one sequence per decomposition chain;
// connectors are preserved verbatim. nullopt when any chain fails.
std::optional<std::vector<std::vector<PrimitiveOp>>> plan_replacement(
    const ComputationGraph& g, const SubgraphSelection& sel,
    const std::vector<TargetSpec>& chain_targets, const SynthConfig& config, Rng& rng);

// Reassembles the skeleton with the given chain ops and splices it in; throws
// like replace_subgraph. Reusable on a structurally identical selection of a
// same-type block.
ComputationGraph apply_replacement(const ComputationGraph& g, const SubgraphSelection& sel,
                                   const std::vector<std::vector<PrimitiveOp>>& chain_ops);

// Decompose -> synthesize each chain against its mutated target over the
// compressed catalog -> diversify -> reassemble -> replace. nullopt when any
// chain fails or the spliced graph does not validate.
std::optional<ComputationGraph> synthesize_replacement(const ComputationGraph& g,
                                                       const SubgraphSelection& sel,
                                                       const std::vector<TargetSpec>& chain_targets,
                                                       const SynthConfig& config, Rng& rng);

}  // namespace propsynth
