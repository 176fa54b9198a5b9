#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "propsynth/serialize.hpp"
#include "propsynth/synth.hpp"

using namespace propsynth;

namespace {

std::vector<PrimitiveOp> default_catalog(std::int64_t channels) {
  CatalogConfig cfg;
  cfg.reference_channels = channels;
  return op_catalog(cfg);
}

// Random feasible task: infer the properties of a random chain and ask for
// them back (the chain itself witnesses feasibility).
SynthesisTask random_task(const std::vector<PrimitiveOp>& catalog, const TensorShape& shape,
                          int max_len, Rng& rng, bool with_shape = true) {
  PropertyState s = identity_state(shape);
  int appended = 0;
  const int len = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_len)));
  while (appended < len) {
    bool ok = false;
    for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
      const auto& op = catalog[rng.uniform_index(catalog.size())];
      if (op.arity() != 1) continue;
      if (auto next = append_abstract(s, op)) {
        s = *next;
        ok = true;
        ++appended;
      }
    }
    if (!ok) break;
  }
  SynthesisTask task;
  task.input_shape = shape;
  task.target.mixing = s.mixing;
  task.target.depth = s.depth.count;
  if (with_shape) task.target.shape = s.shape;
  task.catalog = catalog;
  task.limits.original_size = appended;
  return task;
}

}  // namespace

TEST_CASE("greedy returns an empty sequence for satisfied targets") {
  SynthesisTask task;
  task.input_shape = TensorShape{1, 8, 8, 4};
  task.target.depth = 0;
  task.catalog = default_catalog(4);
  const auto res = greedy_synthesize(task);
  CHECK(res.satisfied());
  CHECK(res.ops.empty());
  CHECK(res.accounting.steps == 0);
  CHECK(res.accounting.distance_evaluations == 0);
}

TEST_CASE("greedy satisfies chain-derived targets with exact accounting") {
  const TensorShape shape{2, 8, 8, 4};
  const auto catalog = default_catalog(4);
  const auto classes = compress_catalog(catalog, shape);
  const auto reps = class_representatives(classes);
  Rng rng(314);
  for (int trial = 0; trial < 50; ++trial) {
    SynthesisTask task = random_task(reps, shape, 5, rng);
    const auto res = greedy_synthesize(task);
    REQUIRE_MESSAGE(res.satisfied(), task.target.summary(), " -> ", res.failure_reason);
    CHECK(replay_satisfies(task, res.ops));
    // Linearity of the loop: one evaluation per op per step.
    CHECK(res.accounting.distance_evaluations ==
          static_cast<std::int64_t>(res.ops.size()) * static_cast<std::int64_t>(reps.size()));
    // Strictly decreasing integer distance trace.
    for (std::size_t i = 1; i < res.accounting.distance_trace.size(); ++i)
      CHECK(res.accounting.distance_trace[i] < res.accounting.distance_trace[i - 1]);
    CHECK(res.accounting.distance_trace.back() == 0);
  }
}

TEST_CASE("greedy on a pure depth target appends exactly depth ops") {
  SynthesisTask task;
  task.input_shape = TensorShape{1, 8, 8, 4};
  task.target.depth = 4;
  task.target.mixing = MixingMatrix::identity(4);
  task.target.shape = task.input_shape;
  task.catalog = default_catalog(4);
  const auto res = greedy_synthesize(task);
  REQUIRE(res.satisfied());
  CHECK(res.ops.size() == 4);
  CHECK(res.accounting.distance_trace == std::vector<std::int64_t>{4, 3, 2, 1, 0});
}

TEST_CASE("greedy reports infeasible targets without stepping") {
  SynthesisTask task;
  task.input_shape = TensorShape{1, 8, 8, 4};
  task.target.shape = TensorShape{1, 3, 3, 4};  // 3 does not divide 8
  task.catalog = default_catalog(4);
  const auto res = greedy_synthesize(task);
  CHECK(res.outcome == SynthOutcome::Infeasible);
  CHECK(res.accounting.steps == 0);
}

TEST_CASE("greedy is policy independent") {
  const auto catalog = default_catalog(4);
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    SynthesisTask task = random_task(catalog, {2, 8, 8, 4}, 4, rng);
    const auto a = greedy_synthesize(task, ExecPolicy::Serial);
    const auto b = greedy_synthesize(task, ExecPolicy::Parallel);
    CHECK(a.ops == b.ops);
    CHECK(a.accounting.distance_trace == b.accounting.distance_trace);
  }
}

TEST_CASE("stochastic synthesis is deterministic under a fixed seed") {
  const auto catalog = default_catalog(4);
  Rng trng(21);
  SynthesisTask task = random_task(catalog, {1, 8, 8, 4}, 4, trng);
  Rng r1(777), r2(777);
  const auto a = stochastic_synthesize(task, r1);
  const auto b = stochastic_synthesize(task, r2);
  CHECK(a.outcome == b.outcome);
  CHECK(a.ops == b.ops);
}

TEST_CASE("stochastic synthesis succeeds on at least 90% of seeded demo runs") {
  // Replacement-style demo task: a conv/ReLU/BatchNorm chain whose depth
  // target was relaxed from 3 to 2 by a mutation.
  const TensorShape shape{1, 8, 8, 8};
  const auto catalog = default_catalog(8);
  const auto classes = compress_catalog(catalog, shape);
  PropertyState chain = identity_state(shape);
  for (const auto& op : {make_conv(8, 3, 1), make_activation(OpKind::ReLU), make_batch_norm()})
    chain = *append_abstract(chain, op);
  SynthesisTask task;
  task.input_shape = shape;
  task.target.mixing = chain.mixing;
  task.target.depth = chain.depth.count - 1;
  task.target.shape = chain.shape;
  task.catalog = class_representatives(classes);
  task.limits.original_size = 3;
  int ok = 0;
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1);
    if (stochastic_synthesize(task, rng).satisfied()) ++ok;
  }
  CHECK(ok >= 180);
}

TEST_CASE("stochastic fails cleanly when the budget cannot reach the target") {
  SynthesisTask task;
  task.input_shape = TensorShape{1, 8, 8, 4};
  task.target.depth = 6;
  task.catalog = default_catalog(4);
  task.limits.original_size = 1;  // budget = 3 < 6 alternations
  Rng rng(5);
  const auto res = stochastic_synthesize(task, rng);
  CHECK(res.outcome == SynthOutcome::Failed);
  CHECK(res.failure_reason.find("budget") != std::string::npos);
}

TEST_CASE("enumerative returns the empty sequence and single ops when possible") {
  const auto catalog = default_catalog(4);
  SynthesisTask task;
  task.input_shape = TensorShape{1, 8, 8, 4};
  task.target.depth = 0;
  task.catalog = catalog;
  Rng rng(3);
  CHECK(enumerative_synthesize(task, rng).ops.empty());

  task.target.depth = 1;
  const auto res = enumerative_synthesize(task, rng);
  REQUIRE(res.satisfied());
  CHECK(res.ops.size() == 1);
}

TEST_CASE("enumerative is a minimality oracle for greedy") {
  const TensorShape shape{2, 8, 8, 4};
  const auto classes = compress_catalog(default_catalog(4), shape);
  const auto reps = class_representatives(classes);
  Rng rng(2718);
  for (int trial = 0; trial < 25; ++trial) {
    SynthesisTask task = random_task(reps, shape, 3, rng);
    task.limits.max_steps = 5;
    const auto greedy = greedy_synthesize(task);
    Rng erng(1);
    const auto enums = enumerative_synthesize(task, erng);
    REQUIRE(greedy.satisfied());
    REQUIRE(enums.satisfied());
    CHECK(enums.ops.size() <= greedy.ops.size());
    CHECK(replay_satisfies(task, enums.ops));
  }
}

TEST_CASE("compression: fewer classes than ops, kind and semantics split") {
  const TensorShape shape{1, 8, 8, 8};
  const auto catalog = default_catalog(8);
  const auto classes = compress_catalog(catalog, shape);
  std::size_t unary = 0;
  for (const auto& op : catalog)
    if (op.arity() == 1) ++unary;
  CHECK(classes.size() < unary);

  auto class_of = [&](const PrimitiveOp& op) -> const OpClass* {
    for (const auto& c : classes)
      for (const auto& m : c.members)
        if (m == op) return &c;
    return nullptr;
  };
  // ReLU and SiLU share abstract semantics but keep separate classes by kind.
  const OpClass* relu = class_of(make_activation(OpKind::ReLU));
  const OpClass* silu = class_of(make_activation(OpKind::SiLU));
  REQUIRE(relu);
  REQUIRE(silu);
  CHECK(relu != silu);
  CHECK(relu->members.size() == 1);

  // Parameters that never matter abstractly merge.
  const OpClass* d1 = class_of(make_dropout(0.1));
  const OpClass* d2 = class_of(make_dropout(0.2));
  REQUIRE(d1);
  CHECK(d1 == d2);
  CHECK(class_of(make_batch_norm(0.9)) == class_of(make_batch_norm(0.99)));
  CHECK(class_of(make_scalar_multiply(0.5)) == class_of(make_scalar_multiply(2.0)));
  // Average and max pooling stay apart (different linearity).
  CHECK(class_of(make_pool(OpKind::AveragePool, 2)) != class_of(make_pool(OpKind::MaxPool, 2)));
  // Dense vs 1x1 convolution: same semantics, different kind.
  CHECK(class_of(make_dense(8)) != class_of(make_conv(8, 1, 1)));
}

TEST_CASE("single-op pools of equal window have equal inferred properties") {
  // Mixing, depth and shape of the one-op subgraphs coincide; only the
  // linearity kind (hence class membership) differs.
  const TensorShape shape{2, 8, 8, 4};
  PropertyState avg = *append_abstract(identity_state(shape), make_pool(OpKind::AveragePool, 2));
  PropertyState mx = *append_abstract(identity_state(shape), make_pool(OpKind::MaxPool, 2));
  CHECK(avg.mixing == mx.mixing);
  CHECK(avg.depth.count == mx.depth.count);
  CHECK(avg.shape == mx.shape);
}

TEST_CASE("compression safety: representatives and full catalog agree") {
  const TensorShape shape{2, 8, 8, 4};
  const auto catalog = default_catalog(4);
  const auto reps = class_representatives(compress_catalog(catalog, shape));
  Rng rng(606);
  for (int trial = 0; trial < 60; ++trial) {
    SynthesisTask task = random_task(catalog, shape, 4, rng);
    SynthesisTask rep_task = task;
    rep_task.catalog = reps;
    const auto full = greedy_synthesize(task);
    const auto compressed = greedy_synthesize(rep_task);
    CHECK(full.satisfied() == compressed.satisfied());
    if (full.satisfied()) {
      CHECK(replay_satisfies(task, full.ops));
      CHECK(replay_satisfies(rep_task, compressed.ops));
    }
  }
}

TEST_CASE("diversify keeps the distance at zero and respects singleton classes") {
  const TensorShape shape{1, 8, 8, 8};
  const auto catalog = default_catalog(8);
  const auto classes = compress_catalog(catalog, shape);
  const auto reps = class_representatives(classes);
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    SynthesisTask task = random_task(reps, shape, 5, rng);
    const auto res = greedy_synthesize(task);
    REQUIRE(res.satisfied());
    const auto varied = diversify(res.ops, classes, rng);
    REQUIRE(varied.size() == res.ops.size());
    CHECK(replay_satisfies(task, varied));
  }
}

TEST_CASE("diversify exchanges class members, e.g. the BatchNorm momentum") {
  const TensorShape shape{1, 8, 8, 8};
  const auto classes = compress_catalog(default_catalog(8), shape);
  const std::vector<PrimitiveOp> seq{make_batch_norm(0.9), make_activation(OpKind::ReLU),
                                     make_dropout(0.1), make_scalar_multiply(0.5)};
  SynthesisTask task;
  task.input_shape = shape;
  {
    PropertyState s = identity_state(shape);
    for (const auto& op : seq) s = *append_abstract(s, op);
    task.target.mixing = s.mixing;
    task.target.depth = s.depth.count;
    task.target.shape = s.shape;
  }
  task.catalog = class_representatives(classes);
  Rng rng(8);
  int swapped = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto varied = diversify(seq, classes, rng);
    CHECK(varied[1] == seq[1]);  // ReLU is a singleton class
    CHECK(replay_satisfies(task, varied));
    for (std::size_t i = 0; i < varied.size(); ++i)
      if (!(varied[i] == seq[i])) ++swapped;
  }
  CHECK(swapped > 0);
}

TEST_CASE("synthesize_replacement with unmutated targets always succeeds") {
  const auto g = load_graph_file(std::string(FIXTURE_DIR) + "/vit_mlp.json");
  const auto sel = make_selection(g, {1, 2, 3});
  const auto dec = decompose_sequential(g, sel);
  const auto states = chain_property_states(g, sel, dec);
  std::vector<TargetSpec> targets;
  for (const auto& s : states) {
    TargetSpec t;
    t.mixing = s.mixing;
    t.depth = s.depth.count;
    t.shape = s.shape;
    targets.push_back(t);
  }
  SynthConfig cfg;
  // Stochastic synthesis can burn its budget; the evolve loop retries, and so
  // does this test.
  std::optional<ComputationGraph> replaced;
  for (std::uint64_t seed = 1; seed <= 10 && !replaced; ++seed) {
    Rng rng(seed);
    replaced = synthesize_replacement(g, sel, targets, cfg, rng);
  }
  REQUIRE(replaced.has_value());
  CHECK(validate(*replaced).ok());
  const auto props = infer_graph_properties(*replaced);
  const auto& out_state = props.at({0, replaced->outputs[0]});
  CHECK(satisfies(out_state, targets[0]));
}

TEST_CASE("unmutated targets give children whose properties dominate the selection") {
  const auto g = load_graph_file(std::string(FIXTURE_DIR) + "/vit_mlp.json");
  const auto sel = make_selection(g, {1, 2, 3});
  const auto dec = decompose_sequential(g, sel);
  const auto states = chain_property_states(g, sel, dec);
  std::vector<TargetSpec> targets;
  for (const auto& st : states) {
    TargetSpec t;
    t.mixing = st.mixing;
    t.depth = st.depth.count;
    t.shape = st.shape;
    targets.push_back(t);
  }
  SynthConfig cfg;
  int produced = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const auto child = synthesize_replacement(g, sel, targets, cfg, rng);
    if (!child) continue;
    ++produced;
    const auto props = infer_graph_properties(*child);
    CHECK(satisfies(props.at({0, child->outputs[0]}), targets[0]));
  }
  CHECK(produced >= 30);  // exact targets leave the budgeted sampler little slack
}

TEST_CASE("residual replacement preserves connectors verbatim") {
  ComputationGraph g;
  g.inputs.push_back({0, TensorShape{1, 8, 8, 4}});
  g.nodes.push_back({1, make_conv(4, 3, 1), {0}});
  g.nodes.push_back({2, make_activation(OpKind::ReLU), {1}});
  g.nodes.push_back({3, make_add(), {2, 0}});
  g.outputs.push_back(3);
  g.blocks.push_back({"body", {1, 2, 3}});
  const auto sel = make_selection(g, {1, 2, 3});
  const auto dec = decompose_sequential(g, sel);
  const auto states = chain_property_states(g, sel, dec);
  std::vector<TargetSpec> targets;
  for (const auto& s : states) {
    TargetSpec t;
    t.mixing = s.mixing;
    t.depth = s.depth.count;
    t.shape = s.shape;
    targets.push_back(t);
  }
  SynthConfig cfg;
  std::optional<ComputationGraph> replaced;
  for (std::uint64_t seed = 1; seed <= 10 && !replaced; ++seed) {
    Rng rng(seed);
    replaced = synthesize_replacement(g, sel, targets, cfg, rng);
  }
  REQUIRE(replaced.has_value());
  int adds = 0;
  for (const auto& n : replaced->nodes)
    if (n.op.kind == OpKind::Add) ++adds;
  CHECK(adds == 1);
}

TEST_CASE("the overview scenario: depth 3 -> 4 forces at least four ops") {
  const auto g = load_graph_file(std::string(FIXTURE_DIR) + "/vit_mlp.json");
  const auto sel = make_selection(g, {1, 2, 3});
  const auto dec = decompose_sequential(g, sel);
  const auto states = chain_property_states(g, sel, dec);
  REQUIRE(states.size() == 1);
  CHECK(states[0].depth.count == 3);
  TargetSpec t;
  t.mixing = states[0].mixing;
  t.depth = 4;
  t.shape = states[0].shape;
  SynthConfig cfg;
  std::optional<ComputationGraph> replaced;
  for (std::uint64_t seed = 1; seed <= 30 && !replaced; ++seed) {
    Rng rng(seed);
    replaced = synthesize_replacement(g, sel, {t}, cfg, rng);
  }
  REQUIRE(replaced.has_value());
  CHECK(replaced->nodes.size() >= 4);
  const auto props = infer_graph_properties(*replaced);
  CHECK(satisfies(props.at({0, replaced->outputs[0]}), t));
}

TEST_CASE("the sampler prefers ops that land closer to the target") {
  // Single exploration step on a channel-mixing target: Dense lands at d=0
  // (weight 1), the other two ops stay at d=4 (weight 1/5), so Dense should
  // be drawn about 5/7 of the time.
  const TensorShape shape{1, 8, 8, 8};
  SynthesisTask task;
  task.input_shape = shape;
  task.target.mixing = op_abstract_semantics(make_dense(8), shape)->mixing;
  task.catalog = {make_dense(8), make_batch_norm(), make_activation(OpKind::ReLU)};
  task.limits.original_size = 1;
  int dense_first = 0;
  const int runs = 600;
  for (std::uint64_t seed = 1; seed <= runs; ++seed) {
    Rng rng(seed);
    const auto res = stochastic_synthesize(task, rng);
    REQUIRE(res.satisfied());
    REQUIRE(!res.ops.empty());
    if (res.ops[0].kind == OpKind::Dense) ++dense_first;
  }
  const double freq = static_cast<double>(dense_first) / runs;
  CHECK(freq > 0.60);
  CHECK(freq < 0.85);  // biased toward progress, still stochastic
}

TEST_CASE("synthesis works on rank-2 shapes") {
  const TensorShape shape{4, 8};
  CatalogConfig cfg;
  cfg.reference_channels = 8;
  const auto catalog = op_catalog(cfg);
  const auto classes = compress_catalog(catalog, shape);
  SynthesisTask task;
  task.input_shape = shape;
  task.target.depth = 3;
  task.target.shape = shape;
  task.catalog = class_representatives(classes);
  const auto res = greedy_synthesize(task);
  REQUIRE(res.satisfied());
  CHECK(res.ops.size() == 3);
  CHECK(replay_satisfies(task, res.ops));
}
