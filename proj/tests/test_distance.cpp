#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "propsynth/distance.hpp"
#include "propsynth/synth.hpp"

using namespace propsynth;

namespace {

MixingMatrix letters(const std::string& s) {
  MixingMatrix m;
  if (!MixingMatrix::from_letters(s, m)) std::abort();
  return m;
}

const MixingMatrix kConvTable = letters("oxxa|xmxa|xxma|xxxa");
const MixingMatrix kDenseTable = letters("oxxa|xoxa|xxoa|xxxa");

// Small catalog used by the exhaustive infeasibility oracle.
std::vector<PrimitiveOp> mini_catalog() {
  return {make_activation(OpKind::ReLU), make_dense(4),  make_conv(4, 3, 1),
          make_pool(OpKind::AveragePool, 2), make_layer_norm(), make_group_norm(2)};
}

// Brute force: does any chain of length <= max_len satisfy the target?
bool exhaustive_reachable(const std::vector<PrimitiveOp>& catalog, const PropertyState& state,
                          const TargetSpec& target, int max_len) {
  if (satisfies(state, target)) return true;
  if (max_len == 0) return false;
  for (const auto& op : catalog) {
    auto next = append_abstract(state, op);
    if (!next) continue;
    if (exhaustive_reachable(catalog, *next, target, max_len - 1)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("d_mixing counts deficient entries") {
  CHECK(d_mixing(kConvTable, kConvTable) == Distance::finite(0));
  CHECK(d_mixing(MixingMatrix::identity(4), kConvTable) == Distance::finite(6));
  CHECK(d_mixing(kConvTable, kDenseTable) == Distance::finite(0));  // conv dominates dense
  CHECK(d_mixing(kDenseTable, kConvTable) == Distance::finite(2));  // spatial diagonal deficit
  CHECK(d_mixing(MixingMatrix::identity(3), kConvTable).inf);
}

TEST_CASE("d_depth is max(0, v - u)") {
  CHECK(d_depth(3, 4) == Distance::finite(1));
  CHECK(d_depth(5, 2) == Distance::finite(0));
  CHECK(d_depth(0, 0) == Distance::finite(0));
}

TEST_CASE("d_shape: divisible equal ratios, channel indicator, infinity otherwise") {
  CHECK(d_shape({1, 8, 8, 16}, {1, 8, 8, 16}) == Distance::finite(0));
  CHECK(d_shape({1, 8, 8, 16}, {1, 4, 4, 16}) == Distance::finite(2));
  CHECK(d_shape({1, 8, 8, 3}, {1, 3, 3, 3}).inf);   // 3 does not divide 8
  CHECK(d_shape({1, 8, 8, 3}, {1, 8, 8, 7}) == Distance::finite(1));
  CHECK(d_shape({1, 8, 4, 3}, {1, 4, 4, 3}).inf);   // unequal spatial ratios
  CHECK(d_shape({1, 8, 8, 3}, {2, 8, 8, 3}).inf);   // batch differs
  CHECK(d_shape({1, 8, 8, 3}, {1, 8, 3}).inf);      // rank differs
  CHECK(d_shape({1, 16, 16, 8}, {1, 4, 4, 4}) == Distance::finite(7));  // 3+3 spatial + channel
}

TEST_CASE("d_total sums components and infinity dominates") {
  const auto catalog = mini_catalog();
  const TensorShape shape{1, 8, 8, 4};
  PropertyState s = identity_state(shape);

  TargetSpec satisfied;
  satisfied.depth = 0;
  CHECK(d_total(s, satisfied, catalog, shape).zero());

  TargetSpec depth4;
  depth4.depth = 4;
  s.depth.count = 1;
  CHECK(d_total(s, depth4, catalog, shape) == Distance::finite(3));

  TargetSpec inf_shape;
  inf_shape.depth = 4;
  inf_shape.shape = TensorShape{1, 3, 3, 4};
  CHECK(d_total(s, inf_shape, catalog, shape).inf);
}

TEST_CASE("feasible_mixing: identity target is reachable, batch pairing is not") {
  const auto catalog = mini_catalog();
  const TensorShape shape{2, 8, 8, 4};
  const MixingMatrix id = MixingMatrix::identity(4);
  CHECK(feasible_mixing(id, id, catalog, shape));
  CHECK(feasible_mixing(id, kConvTable, catalog, shape));

  // Pairing into the batch row beyond the diagonal: no catalog op mixes
  // across the batch, so the fixpoint leaves (B,H) empty.
  MixingMatrix batch_pairing = id;
  batch_pairing.at(0, 1) = Loc::O;
  CHECK_FALSE(feasible_mixing(id, batch_pairing, catalog, shape));
}

TEST_CASE("mixing closure over reachable shapes bounds every composition") {
  const auto catalog = mini_catalog();
  const TensorShape shape{2, 8, 8, 4};
  const MixingMatrix closure = mixing_closure_reachable(MixingMatrix::identity(4), catalog, shape);
  // The single-shape closure is a lower bound of the reachable one.
  CHECK(mixing_closure(MixingMatrix::identity(4), catalog, shape).leq(closure));
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    PropertyState s = identity_state(shape);
    for (int i = 0; i < 4; ++i) {
      const auto& op = catalog[rng.uniform_index(catalog.size())];
      if (auto next = append_abstract(s, op)) s = *next;
    }
    CHECK(s.mixing.leq(closure));
  }
}

TEST_CASE("distance infinity agrees with the exhaustive enumeration oracle") {
  // Shape-preserving mini catalog makes length-4 enumeration complete for
  // these targets: everything feasible here is reachable in at most 4 ops.
  const std::vector<PrimitiveOp> catalog{make_activation(OpKind::ReLU), make_dense(4),
                                         make_conv(4, 3, 1), make_layer_norm(),
                                         make_group_norm(2), make_activation(OpKind::Sigmoid)};
  const TensorShape shape{2, 8, 8, 4};
  const PropertyState init = identity_state(shape);

  MixingMatrix batch_pairing = MixingMatrix::identity(4);
  batch_pairing.at(0, 1) = Loc::O;
  const std::vector<std::optional<MixingMatrix>> mixings{
      std::nullopt, MixingMatrix::identity(4), kDenseTable, kConvTable, letters("oxxx|xmxx|xxmx|xxxo"),
      batch_pairing};
  const std::vector<std::optional<int>> depths{std::nullopt, 0, 1, 2, 3};
  const std::vector<std::optional<TensorShape>> shapes{
      std::nullopt, TensorShape{2, 8, 8, 4}, TensorShape{2, 4, 4, 4}, TensorShape{2, 3, 3, 4}};

  int checked = 0;
  for (const auto& m : mixings)
    for (const auto& d : depths)
      for (const auto& sh : shapes) {
        TargetSpec t;
        t.mixing = m;
        t.depth = d;
        t.shape = sh;
        if (!t.any()) continue;
        const Distance dist = d_total(init, t, catalog, shape);
        const bool reachable = exhaustive_reachable(catalog, init, t, 4);
        CHECK_MESSAGE(dist.inf == !reachable, "target ", t.summary(), " dist ", dist.str(),
                      " reachable ", reachable);
        ++checked;
      }
  CHECK(checked > 100);
}

TEST_CASE("covering: every sampled task has a distance-reducing op, none regress") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const auto catalog = op_catalog(cfg);
  CoveringCheckOptions opt;
  opt.samples = 150;
  const auto rep = covering_check(catalog, opt);
  CHECK(rep.samples == 150);
  CHECK(rep.covered == rep.samples);
  CHECK_MESSAGE(rep.ok(), rep.render());
}

TEST_CASE("covering check is policy independent") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const auto catalog = op_catalog(cfg);
  CoveringCheckOptions serial, parallel;
  serial.samples = parallel.samples = 60;
  parallel.policy = ExecPolicy::Parallel;
  const auto a = covering_check(catalog, serial);
  const auto b = covering_check(catalog, parallel);
  CHECK(a.samples == b.samples);
  CHECK(a.covered == b.covered);
  CHECK(a.violations.size() == b.violations.size());
}

TEST_CASE("shape-preserving sub-catalog still covers mixing and depth") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  std::vector<PrimitiveOp> preserving;
  const TensorShape shape{2, 8, 8, 4};
  for (const auto& op : op_catalog(cfg)) {
    if (op.arity() != 1) continue;
    auto sem = op_abstract_semantics(op, shape);
    if (sem && sem->out_shape == shape) preserving.push_back(op);
  }
  REQUIRE(preserving.size() > 5);

  // Mixing+depth targets from random chains over the full catalog must be
  // coverable by shape-preserving ops alone.
  const auto full = op_catalog(cfg);
  Rng rng(99);
  int tested = 0;
  for (int trial = 0; trial < 300 && tested < 100; ++trial) {
    PropertyState target_state = identity_state(shape);
    for (int i = 0; i < 4; ++i) {
      const auto& op = full[rng.uniform_index(full.size())];
      if (op.arity() != 1) continue;
      if (auto next = append_abstract(target_state, op)) target_state = *next;
    }
    TargetSpec t;
    t.mixing = target_state.mixing;
    t.depth = target_state.depth.count;
    const PropertyState init = identity_state(shape);
    DistanceEvaluator ev(t, preserving, shape);
    const Distance d0 = ev.total(init);
    if (d0.inf || d0.zero()) continue;
    ++tested;
    bool progress = false;
    for (const auto& op : preserving) {
      auto next = append_abstract(init, op);
      if (!next) continue;
      const Distance d1 = ev.total(*next);
      if (!d1.inf && d1.value + 1 <= d0.value) progress = true;
    }
    CHECK(progress);
  }
  CHECK(tested == 100);
}

TEST_CASE("strengthen_distance lifts weak coverings") {
  const auto d = [](double x) { return x; };
  auto strong = strengthen_distance(d, 1.0);
  CHECK(strong(0.0) == 0.0);
  CHECK(strong(0.5) == 1.5);
  CHECK(strong(2.0) == 3.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(strong(inf)));
  // Order preserved off zero.
  CHECK(strong(0.25) < strong(0.5));
}

TEST_CASE("per-component progress: pool fixes spatial, dense fixes channel, alternation fixes depth") {
  CatalogConfig cfg;
  cfg.reference_channels = 8;
  const auto catalog = op_catalog(cfg);
  const TensorShape shape{1, 8, 8, 8};
  const PropertyState init = identity_state(shape);

  // Spatial deficit: a pooling op reduces the spatial part, channel unchanged.
  TargetSpec spatial;
  spatial.shape = TensorShape{1, 4, 4, 8};
  DistanceEvaluator ev_s(spatial, catalog, shape);
  CHECK(ev_s.shape_component(init) == Distance::finite(2));
  const auto pooled = append_abstract(init, make_pool(OpKind::AveragePool, 2));
  REQUIRE(pooled.has_value());
  CHECK(ev_s.shape_component(*pooled) == Distance::finite(0));

  // Channel deficit: a dense layer zeroes it and leaves the spatial part.
  TargetSpec channel;
  channel.shape = TensorShape{1, 8, 8, 4};
  DistanceEvaluator ev_c(channel, catalog, shape);
  CHECK(ev_c.shape_component(init) == Distance::finite(1));
  const auto densed = append_abstract(init, make_dense(4));
  REQUIRE(densed.has_value());
  CHECK(ev_c.shape_component(*densed) == Distance::finite(0));
  // Mixed deficit: pooling leaves the channel indicator in place.
  TargetSpec both;
  both.shape = TensorShape{1, 4, 4, 4};
  DistanceEvaluator ev_b(both, catalog, shape);
  CHECK(ev_b.shape_component(*pooled) == Distance::finite(1));

  // Depth deficit: appending an alternating op reduces it by one.
  TargetSpec depth;
  depth.depth = init.depth.count + 1;
  DistanceEvaluator ev_d(depth, catalog, shape);
  CHECK(ev_d.depth_component(init) == Distance::finite(1));
  const auto relu = append_abstract(init, make_activation(OpKind::ReLU));
  CHECK(ev_d.depth_component(*relu) == Distance::finite(0));
}

TEST_CASE("uniform covering holds over 1000 sampled tasks") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const auto catalog = op_catalog(cfg);
  CoveringCheckOptions opt;
  opt.samples = 1000;
  opt.policy = ExecPolicy::Parallel;
  const auto rep = covering_check(catalog, opt);
  CHECK(rep.samples == 1000);
  CHECK(rep.covered == rep.samples);
  CHECK_MESSAGE(rep.ok(), rep.render());
}
