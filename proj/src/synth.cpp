#include "propsynth/synth.hpp"

#include <algorithm>
#include <map>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

namespace propsynth {

namespace {

int effective_original_size(const SynthesisTask& task, const Distance& d0) {
  if (task.limits.original_size > 0) return task.limits.original_size;
  int implied = d0.zero() ? 0 : 1;
  if (task.target.depth) implied = std::max(implied, *task.target.depth);
  return implied;
}

struct Candidate {
  Distance d = Distance::infinite();
  std::optional<PropertyState> state;
};

// Distances after appending each catalog op; one evaluation per op, shape
// failures count as infinity.
std::vector<Candidate> score_candidates(const SynthesisTask& task, const DistanceEvaluator& ev,
                                        const PropertyState& state, ExecPolicy policy) {
  std::vector<Candidate> out(task.catalog.size());
  parallel_for_static(policy, static_cast<std::int64_t>(task.catalog.size()), [&](std::int64_t i) {
    const auto& op = task.catalog[static_cast<std::size_t>(i)];
    if (op.arity() != 1) return;
    auto next = append_abstract(state, op);
    if (!next) return;
    out[static_cast<std::size_t>(i)] = {ev.total(*next), std::move(next)};
  });
  return out;
}

}  // namespace

SynthesisResult greedy_synthesize(const SynthesisTask& task, ExecPolicy policy) {
  SynthesisResult res;
  DistanceEvaluator ev(task.target, task.catalog, task.input_shape);
  PropertyState state = identity_state(task.input_shape);
  Distance d = ev.total(state);
  if (d.inf) {
    res.outcome = SynthOutcome::Infeasible;
    return res;
  }
  res.accounting.distance_trace.push_back(d.value);
  while (!d.zero()) {
    if (res.accounting.steps >= task.limits.max_steps) {
      res.outcome = SynthOutcome::Failed;
      res.failure_reason = "step budget exhausted";
      return res;
    }
    const auto cands = score_candidates(task, ev, state, policy);
    res.accounting.distance_evaluations += static_cast<std::int64_t>(task.catalog.size());
    std::size_t best = task.catalog.size();
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (best == task.catalog.size() || cands[i].d < cands[best].d) best = i;
    if (best == task.catalog.size() || !(cands[best].d < d)) {
      // Unreachable while the catalog covers the sampled targets.
      res.outcome = SynthOutcome::Failed;
      res.failure_reason = "no operation makes progress";
      return res;
    }
    state = *cands[best].state;
    d = cands[best].d;
    res.ops.push_back(task.catalog[best]);
    res.accounting.steps += 1;
    res.accounting.distance_trace.push_back(d.value);
  }
  res.outcome = SynthOutcome::Satisfied;
  return res;
}

SynthesisResult stochastic_synthesize(const SynthesisTask& task, Rng& rng) {
  SynthesisResult res;
  DistanceEvaluator ev(task.target, task.catalog, task.input_shape);
  PropertyState state = identity_state(task.input_shape);
  Distance d = ev.total(state);
  if (d.inf) {
    res.outcome = SynthOutcome::Infeasible;
    return res;
  }
  const int original_size = effective_original_size(task, d);
  const int budget = original_size + 2;
  res.accounting.distance_trace.push_back(d.value);

  auto commit = [&](const Candidate& c, const PrimitiveOp& op) {
    state = *c.state;
    d = c.d;
    res.ops.push_back(op);
    res.accounting.steps += 1;
    res.accounting.distance_trace.push_back(d.value);
  };

  // Exploration phase: weight 1/(1+d) over the feasible ops.
  while (static_cast<int>(res.ops.size()) < original_size && !d.zero()) {
    const auto cands = score_candidates(task, ev, state, ExecPolicy::Serial);
    res.accounting.distance_evaluations += static_cast<std::int64_t>(task.catalog.size());
    double total_w = 0.0;
    std::vector<double> weights(cands.size(), 0.0);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].d.inf) continue;
      weights[i] = 1.0 / (1.0 + static_cast<double>(cands[i].d.value));
      total_w += weights[i];
    }
    if (total_w == 0.0) {
      res.outcome = SynthOutcome::Failed;
      res.failure_reason = "no feasible operation";
      return res;
    }
    double pick = rng.uniform01() * total_w;
    std::size_t chosen = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] == 0.0) continue;
      chosen = i;
      pick -= weights[i];
      if (pick <= 0.0) break;
    }
    commit(cands[chosen], task.catalog[chosen]);
  }

  // Greedy tail: at most two steps beyond the original size.
  while (!d.zero()) {
    if (static_cast<int>(res.ops.size()) >= budget) {
      res.outcome = SynthOutcome::Failed;
      res.failure_reason = "budget: unsatisfied after original size + 2 steps";
      return res;
    }
    const auto cands = score_candidates(task, ev, state, ExecPolicy::Serial);
    res.accounting.distance_evaluations += static_cast<std::int64_t>(task.catalog.size());
    std::size_t best = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (best == cands.size() || cands[i].d < cands[best].d) best = i;
    if (best == cands.size() || !(cands[best].d < d)) {
      res.outcome = SynthOutcome::Failed;
      res.failure_reason = "no operation makes progress";
      return res;
    }
    commit(cands[best], task.catalog[best]);
  }
  res.outcome = SynthOutcome::Satisfied;
  return res;
}

SynthesisResult enumerative_synthesize(const SynthesisTask& task, Rng& rng) {
  SynthesisResult res;
  DistanceEvaluator ev(task.target, task.catalog, task.input_shape);
  const PropertyState init = identity_state(task.input_shape);
  const Distance d0 = ev.total(init);
  if (d0.inf) {
    res.outcome = SynthOutcome::Infeasible;
    return res;
  }
  res.accounting.distance_trace.push_back(d0.value);
  res.accounting.distance_evaluations += 1;
  if (d0.zero()) {
    res.outcome = SynthOutcome::Satisfied;
    return res;
  }

  std::vector<std::size_t> hit;
  // Depth-first over sequences of exactly `size` ops; every level draws a
  // fresh random order, giving a random enumeration order per size.
  std::function<bool(const PropertyState&, int, std::vector<std::size_t>&)> dfs =
      [&](const PropertyState& state, int remaining, std::vector<std::size_t>& prefix) -> bool {
    std::vector<std::size_t> order(task.catalog.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::size_t idx : order) {
      const auto& op = task.catalog[idx];
      if (op.arity() != 1) continue;
      auto next = append_abstract(state, op);
      if (!next) continue;
      prefix.push_back(idx);
      if (remaining == 1) {
        res.accounting.distance_evaluations += 1;
        if (res.accounting.distance_evaluations > task.limits.enum_budget) return true;  // aborted
        if (ev.total(*next).zero()) {
          hit = prefix;
          return true;
        }
      } else if (dfs(*next, remaining - 1, prefix)) {
        return true;
      }
      prefix.pop_back();
    }
    return false;
  };

  for (int size = 1; size <= task.limits.max_steps; ++size) {
    std::vector<std::size_t> prefix;
    if (dfs(init, size, prefix)) {
      if (!hit.empty()) {
        for (std::size_t idx : hit) res.ops.push_back(task.catalog[idx]);
        res.accounting.steps = static_cast<std::int64_t>(hit.size());
        res.outcome = SynthOutcome::Satisfied;
        return res;
      }
      res.outcome = SynthOutcome::Failed;
      res.failure_reason = "enumeration budget exhausted";
      return res;
    }
  }
  res.outcome = SynthOutcome::Failed;
  res.failure_reason = "enumeration size cap reached";
  return res;
}

bool replay_satisfies(const SynthesisTask& task, const std::vector<PrimitiveOp>& ops) {
  PropertyState state = identity_state(task.input_shape);
  for (const auto& op : ops) {
    auto next = append_abstract(state, op);
    if (!next) return false;
    state = *next;
  }
  return d_total(state, task.target, task.catalog, task.input_shape).zero();
}

std::vector<OpClass> compress_catalog(const std::vector<PrimitiveOp>& catalog,
                                      const TensorShape& working_shape) {
  const auto probes = reachable_probe_shapes(catalog, working_shape);
  std::map<std::string, OpClass> classes;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& op = catalog[i];
    if (op.arity() != 1) continue;
    std::string sig = std::string(op_kind_name(op.kind)) + "$";
    for (const auto& p : probes) {
      auto sem = op_abstract_semantics(op, p);
      sig += sem ? sem->key() : "-";
      sig += ";";
    }
    auto it = classes.find(sig);
    if (it == classes.end()) {
      classes[sig] = {op, i, {op}, sig};
      order.push_back(sig);
    } else {
      it->second.members.push_back(op);
    }
  }
  std::vector<OpClass> out;
  out.reserve(order.size());
  for (const auto& sig : order) out.push_back(classes.at(sig));
  return out;
}

std::vector<PrimitiveOp> class_representatives(const std::vector<OpClass>& classes) {
  std::vector<PrimitiveOp> reps;
  reps.reserve(classes.size());
  for (const auto& c : classes) reps.push_back(c.representative);
  return reps;
}

std::vector<PrimitiveOp> diversify(const std::vector<PrimitiveOp>& ops,
                                   const std::vector<OpClass>& classes, Rng& rng) {
  std::vector<PrimitiveOp> out;
  out.reserve(ops.size());
  for (const auto& op : ops) {
    const OpClass* home = nullptr;
    for (const auto& c : classes)
      for (const auto& m : c.members)
        if (m == op) home = &c;
    if (!home || home->members.size() == 1) {
      out.push_back(op);
      continue;
    }
    out.push_back(home->members[rng.uniform_index(home->members.size())]);
  }
  return out;
}

std::vector<PropertyState> chain_property_states(const ComputationGraph& g,
                                                 const SubgraphSelection& sel,
                                                 const Decomposition& dec) {
  const auto shapes = g.infer_shapes();
  auto source_shape = [&](const DecChain& chain) {
    const Node* first = g.find_node(chain.nodes.front());
    return shapes.at(first->inputs[0]);
  };
  (void)sel;
  std::vector<PropertyState> states;
  states.reserve(dec.chains.size());
  for (const auto& chain : dec.chains) {
    PropertyState s = identity_state(source_shape(chain));
    for (NodeId id : chain.nodes) {
      auto next = append_abstract(s, g.find_node(id)->op);
      if (!next) throw std::runtime_error("chain_property_states: chain op inapplicable");
      s = *next;
    }
    states.push_back(std::move(s));
  }
  return states;
}

std::optional<std::vector<std::vector<PrimitiveOp>>> plan_replacement(
    const ComputationGraph& g, const SubgraphSelection& sel,
    const std::vector<TargetSpec>& chain_targets, const SynthConfig& config, Rng& rng) {
  const Decomposition dec = decompose_sequential(g, sel);
  if (chain_targets.size() != dec.chains.size())
    throw std::invalid_argument("plan_replacement: need one target per chain");
  const auto shapes = g.infer_shapes();

  std::vector<std::vector<PrimitiveOp>> new_chains;
  for (std::size_t i = 0; i < dec.chains.size(); ++i) {
    const Node* first = g.find_node(dec.chains[i].nodes.front());
    const TensorShape in_shape = shapes.at(first->inputs[0]);

    CatalogConfig cat_cfg = config.catalog;
    cat_cfg.reference_channels = in_shape.channels();
    const auto catalog = op_catalog(cat_cfg);
    const auto classes = compress_catalog(catalog, in_shape);

    SynthesisTask task;
    task.input_shape = in_shape;
    task.target = relax_target_for_missing_shape(chain_targets[i], catalog, in_shape);
    task.catalog = class_representatives(classes);
    task.limits = config.limits;
    task.limits.original_size = static_cast<int>(dec.chains[i].nodes.size());

    auto res = stochastic_synthesize(task, rng);
    if (!res.satisfied()) return std::nullopt;
    new_chains.push_back(diversify(res.ops, classes, rng));
  }
  return new_chains;
}

ComputationGraph apply_replacement(const ComputationGraph& g, const SubgraphSelection& sel,
                                   const std::vector<std::vector<PrimitiveOp>>& chain_ops) {
  const Decomposition dec = decompose_sequential(g, sel);
  const ComputationGraph fragment = reassemble(g, sel, dec, chain_ops);
  return replace_subgraph(g, sel, fragment);
}

std::optional<ComputationGraph> synthesize_replacement(const ComputationGraph& g,
                                                       const SubgraphSelection& sel,
                                                       const std::vector<TargetSpec>& chain_targets,
                                                       const SynthConfig& config, Rng& rng) {
  auto plan = plan_replacement(g, sel, chain_targets, config, rng);
  if (!plan) return std::nullopt;
  try {
    return apply_replacement(g, sel, *plan);
  } catch (const std::exception&) {
    return std::nullopt;  // spliced graph failed validation
  }
}

}  // namespace propsynth
