#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace propsynth::theory {

// A value together with its declared evaluation cost in abstract steps. The
// schedulers below simulate parallelism by deterministic round-robin stepping;
// one step equals one declared cost unit, wall-clock is irrelevant.
struct Metered {
  double value = 0.0;
  std::int64_t cost = 1;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// A resumable condition: the (precomputed) boolean becomes observable only
// after `cost` step() calls.
class SteppedCond {
 public:
  SteppedCond(bool result, std::int64_t cost) : result_(result), cost_(cost < 1 ? 1 : cost) {}

  bool step() {
    if (taken_ < cost_) ++taken_;
    return done();
  }
  bool done() const { return taken_ >= cost_; }
  bool result() const { return result_; }
  std::int64_t cost() const { return cost_; }
  std::int64_t steps_taken() const { return taken_; }

 private:
  bool result_;
  std::int64_t cost_;
  std::int64_t taken_ = 0;
};

struct ParallelSearchOutcome {
  bool found = false;
  std::size_t index = 0;
  std::int64_t total_steps = 0;
};

// Round-robin stepping over all conditions, one step at a time; returns the
// first satisfying condition to complete. Total steps never exceed
// |tasks| * cost(returned condition).
inline ParallelSearchOutcome parallel_search(std::vector<SteppedCond>& tasks) {
  ParallelSearchOutcome out;
  bool all_done = false;
  while (!all_done) {
    all_done = true;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].done()) continue;
      out.total_steps += 1;
      const bool done = tasks[i].step();
      if (done && tasks[i].result()) {
        out.found = true;
        out.index = i;
        return out;
      }
      if (!tasks[i].done()) all_done = false;
    }
  }
  return out;  // nothing satisfied
}

// Synthesis domain with an op alphabet indexed 0..alphabet_size-1, an apply
// function and a metered distance. Distance value kInf marks infeasibility.
template <class State>
struct SteppedDomain {
  int alphabet_size = 0;
  std::function<std::optional<State>(const State&, int)> apply;
  std::function<Metered(const State&)> distance;

  std::optional<State> apply_string(const State& s, const std::vector<int>& ops) const {
    State cur = s;
    for (int op : ops) {
      auto next = apply(cur, op);
      if (!next) return std::nullopt;
      cur = *next;
    }
    return cur;
  }
};

struct StepAccounting {
  std::int64_t search_steps = 0;   // inside ParallelSearch / UniversalSearch
  std::int64_t commit_steps = 0;   // distance evaluations on committed states
  int iterations = 0;
  std::vector<std::int64_t> per_iteration_search_steps;
};

template <class State>
struct SteppedSynthesisResult {
  bool satisfied = false;
  bool infeasible = false;
  std::string failure;
  std::vector<int> ops;
  StepAccounting accounting;
};

// Greedy loop with the candidate scan replaced by a parallel search for any op
// that decreases the distance by at least epsilon (the fastest continuation).
template <class State>
SteppedSynthesisResult<State> parallel_progressive_synthesize(const SteppedDomain<State>& dom,
                                                              const State& initial, double epsilon,
                                                              int max_iterations = 64) {
  SteppedSynthesisResult<State> res;
  Metered d = dom.distance(initial);
  res.accounting.commit_steps += d.cost;
  if (d.value == kInf) {
    res.infeasible = true;
    return res;
  }
  State state = initial;
  while (d.value != 0.0) {
    if (res.accounting.iterations >= max_iterations) {
      res.failure = "iteration budget exhausted";
      return res;
    }
    std::vector<SteppedCond> conds;
    std::vector<std::optional<State>> nexts;
    conds.reserve(static_cast<std::size_t>(dom.alphabet_size));
    for (int op = 0; op < dom.alphabet_size; ++op) {
      auto next = dom.apply(state, op);
      if (!next) {
        conds.emplace_back(false, 1);
        nexts.push_back(std::nullopt);
        continue;
      }
      const Metered m = dom.distance(*next);
      conds.emplace_back(m.value + epsilon <= d.value, m.cost);
      nexts.push_back(std::move(next));
    }
    const auto found = parallel_search(conds);
    res.accounting.search_steps += found.total_steps;
    res.accounting.per_iteration_search_steps.push_back(found.total_steps);
    if (!found.found) {
      res.failure = "no transformation decreases the distance";
      return res;
    }
    state = *nexts[found.index];
    res.ops.push_back(static_cast<int>(found.index));
    d = dom.distance(state);
    res.accounting.commit_steps += d.cost;
    res.accounting.iterations += 1;
  }
  res.satisfied = true;
  return res;
}

struct UniversalSearchOutcome {
  bool found = false;
  std::vector<int> string;
  std::int64_t total_steps = 0;
  int phases = 0;
};

// Phase-structured interleaving over all strings from the alphabet: during
// phase i every string of length <= i has run for a cumulative budget of
// max(i, |E|^i) steps. Strings of length i enter at phase i with the previous
// phase's budget first.
inline UniversalSearchOutcome universal_search(
    int alphabet, const std::function<Metered(const std::vector<int>&)>& cond, int max_phase = 24) {
  struct Instance {
    std::vector<int> string;
    SteppedCond state;
  };
  UniversalSearchOutcome out;
  std::vector<Instance> instances;

  auto budget_for = [&](int phase) -> std::int64_t {
    if (phase <= 0) return 1;  // max(0, |E|^0) = 1
    double b = std::pow(static_cast<double>(alphabet), phase);
    b = std::max(b, static_cast<double>(phase));
    return b > 1e15 ? static_cast<std::int64_t>(1e15) : static_cast<std::int64_t>(b);
  };

  // Round-robin all listed instances up to a cumulative per-instance budget.
  auto run_round = [&](std::int64_t budget) -> bool {
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto& inst : instances) {
        if (inst.state.done() || inst.state.steps_taken() >= budget) continue;
        out.total_steps += 1;
        const bool done = inst.state.step();
        moved = true;
        if (done && inst.state.result()) {
          out.found = true;
          out.string = inst.string;
          return true;
        }
      }
    }
    return false;
  };

  std::vector<std::vector<int>> frontier{{}};  // strings of length == phase
  for (int phase = 0; phase <= max_phase; ++phase) {
    out.phases = phase;
    if (phase > 0) {
      std::vector<std::vector<int>> next;
      for (const auto& s : frontier)
        for (int a = 0; a < alphabet; ++a) {
          auto t = s;
          t.push_back(a);
          next.push_back(std::move(t));
        }
      frontier = std::move(next);
    }
    // Metered.value carries the condition truth (1.0 true / 0.0 false).
    for (const auto& s : frontier) {
      const Metered m = cond(s);
      instances.push_back({s, SteppedCond(m.value > 0.5, m.cost)});
    }
    // Newcomers catch up to the veterans, then the whole phase budget applies.
    if (phase > 0 && run_round(budget_for(phase - 1))) return out;
    if (run_round(budget_for(phase))) return out;
  }
  return out;
}

// Progressive synthesis needing only the distance: each iteration uses
// universal search over op strings for any strict decrease.
template <class State>
SteppedSynthesisResult<State> universal_progressive_synthesize(const SteppedDomain<State>& dom,
                                                               const State& initial,
                                                               int max_phase = 16,
                                                               int max_iterations = 64) {
  SteppedSynthesisResult<State> res;
  Metered d = dom.distance(initial);
  res.accounting.commit_steps += d.cost;
  if (d.value == kInf) {
    res.infeasible = true;
    return res;
  }
  State state = initial;
  while (d.value != 0.0) {
    if (res.accounting.iterations >= max_iterations) {
      res.failure = "iteration budget exhausted";
      return res;
    }
    const double d_prev = d.value;
    auto cond = [&](const std::vector<int>& ops) -> Metered {
      auto next = dom.apply_string(state, ops);
      if (!next) return {0.0, 1};
      const Metered m = dom.distance(*next);
      return {m.value < d_prev ? 1.0 : 0.0, m.cost};
    };
    const auto found = universal_search(dom.alphabet_size, cond, max_phase);
    res.accounting.search_steps += found.total_steps;
    res.accounting.per_iteration_search_steps.push_back(found.total_steps);
    if (!found.found) {
      res.failure = "universal search phase cap exceeded";
      return res;
    }
    for (int op : found.string) res.ops.push_back(op);
    state = *dom.apply_string(state, found.string);
    d = dom.distance(state);
    res.accounting.commit_steps += d.cost;
    res.accounting.iterations += 1;
  }
  res.satisfied = true;
  return res;
}

// Distance induced by a sound and complete synthesizer: infinity when the
// algorithm reports infeasible, else the length of its output.
template <class State, class Algo>
auto distance_from_algorithm(Algo algo) {
  return [algo = std::move(algo)](const State& s) -> double {
    const std::optional<std::vector<int>> r = algo(s);
    return r ? static_cast<double>(r->size()) : kInf;
  };
}

}  // namespace propsynth::theory
