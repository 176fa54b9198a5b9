#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "propsynth/abstract.hpp"
#include "propsynth/oracle.hpp"
#include "propsynth/serialize.hpp"

using namespace propsynth;

namespace {

MixingMatrix letters(const std::string& s) {
  MixingMatrix m;
  if (!MixingMatrix::from_letters(s, m)) std::abort();
  return m;
}

const MixingMatrix kConvTable = letters("oxxa|xmxa|xxma|xxxa");
const MixingMatrix kDenseTable = letters("oxxa|xoxa|xxoa|xxxa");

}  // namespace

TEST_CASE("composing dense after conv keeps the conv matrix") {
  CHECK(mix_compose(kDenseTable, kConvTable) == kConvTable);
  CHECK(mix_compose(kConvTable, kDenseTable) == kConvTable);
}

TEST_CASE("composing conv with conv keeps many-to-one spatial and all-to-one channel") {
  const MixingMatrix c2 = mix_compose(kConvTable, kConvTable);
  CHECK(c2.at(1, 1) == Loc::M);
  CHECK(c2.at(2, 2) == Loc::M);
  for (int r = 0; r < 4; ++r) CHECK(c2.at(r, 3) == Loc::A);
  CHECK(c2 == kConvTable);
}

TEST_CASE("ReLU semantics: identity mixing, nonlinear, shape preserved") {
  const auto sem = op_abstract_semantics(make_activation(OpKind::ReLU), TensorShape{2, 6, 6, 4});
  REQUIRE(sem.has_value());
  CHECK(sem->mixing == MixingMatrix::identity(4));
  CHECK_FALSE(sem->linear);
  CHECK(sem->out_shape == TensorShape{2, 6, 6, 4});
}

TEST_CASE("conv semantics at (2,5,5,3): table matrix, linear, channel set") {
  const auto sem = op_abstract_semantics(make_conv(16, 3, 1), TensorShape{2, 5, 5, 3});
  REQUIRE(sem.has_value());
  CHECK(sem->mixing == kConvTable);
  CHECK(sem->linear);
  CHECK(sem->out_shape == TensorShape{2, 5, 5, 16});
}

TEST_CASE("pool semantics: spatial many-to-one diagonal, dims divided") {
  const auto sem = op_abstract_semantics(make_pool(OpKind::AveragePool, 2), TensorShape{2, 8, 8, 4});
  REQUIRE(sem.has_value());
  CHECK(sem->mixing == letters("oxxx|xmxx|xxmx|xxxo"));
  CHECK(sem->linear);
  CHECK(sem->out_shape == TensorShape{2, 4, 4, 4});
}

TEST_CASE("abstract semantics equal the oracle for every applicable default-catalog op") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const TensorShape shape{2, 6, 6, 4};
  for (const auto& op : op_catalog(cfg)) {
    if (op.arity() != 1) continue;
    const auto sem = op_abstract_semantics(op, shape);
    if (!sem) continue;
    if (sem->out_shape.elements() > 4096) continue;
    CHECK_MESSAGE(sem->mixing == concrete_mixing(op, shape), op.display());
  }
}

TEST_CASE("window ops turn all-to-one when the window covers the whole extent") {
  // 5x5 kernel over a 4x4 image reaches every position from the center.
  const auto sem = op_abstract_semantics(make_conv(4, 5, 1), TensorShape{2, 4, 4, 4});
  REQUIRE(sem.has_value());
  CHECK(sem->mixing.at(1, 1) == Loc::A);
  CHECK(sem->mixing == concrete_mixing(make_conv(4, 5, 1), {2, 4, 4, 4}));
}

TEST_CASE("append_abstract: ReLU on a fresh state bumps depth once") {
  const PropertyState s0 = identity_state({2, 8, 8, 4});
  const auto s1 = append_abstract(s0, make_activation(OpKind::ReLU));
  REQUIRE(s1.has_value());
  CHECK(s1->depth.count == 1);
  CHECK(s1->mixing == MixingMatrix::identity(4));
  CHECK(s1->shape == s0.shape);
}

TEST_CASE("Dense, GeLU, Dense alternates to depth 3") {
  PropertyState s = identity_state({1, 4, 4, 8});
  for (const auto& op : {make_dense(32), make_activation(OpKind::GeLU), make_dense(8)})
    s = *append_abstract(s, op);
  CHECK(s.depth.count == 3);
}

TEST_CASE("repeated ReLU does not alternate") {
  PropertyState s = identity_state({1, 4, 4, 4});
  s = *append_abstract(s, make_activation(OpKind::ReLU));
  s = *append_abstract(s, make_activation(OpKind::ReLU));
  CHECK(s.depth.count == 1);
}

TEST_CASE("append_abstract fails when the shape transform fails") {
  const PropertyState s = identity_state({1, 5, 5, 4});
  CHECK_FALSE(append_abstract(s, make_pool(OpKind::AveragePool, 2)).has_value());
  CHECK_FALSE(append_abstract(s, make_group_norm(3)).has_value());
}

TEST_CASE("identity graph properties: identity matrix, depth 0, shape preserved") {
  ComputationGraph g;
  g.inputs.push_back({0, TensorShape{1, 8, 8, 3}});
  g.outputs.push_back(0);
  const auto props = infer_graph_properties(g);
  const auto& s = props.at({0, 0});
  CHECK(s.mixing == MixingMatrix::identity(4));
  CHECK(s.depth.count == 0);
  CHECK(s.shape == TensorShape{1, 8, 8, 3});
}

TEST_CASE("depth over two paths takes the max; unreachable pairs are zero") {
  // I1 -> dense -> O1 ; I2 -> {dense->relu->dense, relu} -> add -> O2
  ComputationGraph g;
  g.inputs.push_back({0, TensorShape{1, 4, 4, 4}});
  g.inputs.push_back({1, TensorShape{1, 4, 4, 4}});
  g.nodes.push_back({2, make_dense(4), {0}});
  g.nodes.push_back({3, make_dense(4), {1}});
  g.nodes.push_back({4, make_activation(OpKind::ReLU), {3}});
  g.nodes.push_back({5, make_dense(4), {4}});
  g.nodes.push_back({6, make_activation(OpKind::ReLU), {1}});
  g.nodes.push_back({7, make_add(), {5, 6}});
  g.outputs.push_back(2);  // O1
  g.outputs.push_back(7);  // O2
  const auto props = infer_graph_properties(g);
  CHECK(props.at({1, 7}).depth.count == 3);  // long path: dense relu dense (add stays linear)
  CHECK(props.at({0, 2}).depth.count == 1);
  // No path from I2 to O1: depth 0, all-X mixing.
  const auto& none = props.at({1, 2});
  CHECK(none.depth.count == 0);
  CHECK(none.mixing == MixingMatrix(4, 4));
}

TEST_CASE("residual add merges branch mixing entrywise") {
  ComputationGraph g;
  g.inputs.push_back({0, TensorShape{2, 8, 8, 4}});
  g.nodes.push_back({1, make_conv(4, 3, 1), {0}});
  g.nodes.push_back({2, make_activation(OpKind::ReLU), {1}});
  g.nodes.push_back({3, make_add(), {2, 0}});
  g.outputs.push_back(3);
  const auto props = infer_graph_properties(g);
  const auto conv_sem = op_abstract_semantics(make_conv(4, 3, 1), TensorShape{2, 8, 8, 4});
  const MixingMatrix expected = loc_add(conv_sem->mixing, MixingMatrix::identity(4));
  CHECK(props.at({0, 3}).mixing == expected);

  // Cross-check against the concrete oracle on the same dataflow: the branch
  // pattern unioned with the skip connection.
  const TensorShape shape{2, 8, 8, 4};
  const auto branch = compose_patterns(
      contribution_pattern(make_activation(OpKind::ReLU), TensorShape{2, 8, 8, 4}),
      contribution_pattern(make_conv(4, 3, 1), shape));
  const auto oracle = mixing_from_pattern(union_patterns(branch, identity_pattern(shape)));
  CHECK(props.at({0, 3}).mixing.leq(oracle));
  CHECK(props.at({0, 3}).mixing == oracle);
}

TEST_CASE("append_abstract on a chain equals infer_graph_properties of the chain graph") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const auto catalog = op_catalog(cfg);
  Rng rng(404);
  const TensorShape shape{2, 8, 8, 4};
  for (int trial = 0; trial < 100; ++trial) {
    PropertyState s = identity_state(shape);
    std::vector<PrimitiveOp> ops;
    const int len = 1 + static_cast<int>(rng.uniform_index(5));
    for (int i = 0; i < len; ++i) {
      for (int attempt = 0; attempt < 12; ++attempt) {
        const auto& op = catalog[rng.uniform_index(catalog.size())];
        if (op.arity() != 1) continue;
        if (auto next = append_abstract(s, op)) {
          s = *next;
          ops.push_back(op);
          break;
        }
      }
    }
    if (ops.empty()) continue;
    const auto g = chain_graph(shape, ops);
    const auto props = infer_graph_properties(g);
    const auto& inferred = props.at({0, g.outputs[0]});
    CHECK(inferred.mixing == s.mixing);
    CHECK(inferred.depth.count == s.depth.count);
    CHECK(inferred.shape == s.shape);
  }
}

TEST_CASE("vit mlp fixture has depth 3") {
  const auto g = load_graph_file(std::string(FIXTURE_DIR) + "/vit_mlp.json");
  CHECK(infer_graph_properties(g).at({0, 3}).depth.count == 3);
}

TEST_CASE("satisfaction semantics") {
  PropertyState s = identity_state({1, 8, 8, 4});
  s = *append_abstract(s, make_conv(4, 3, 1));

  TargetSpec depth_only;
  depth_only.depth = 0;
  CHECK(satisfies(s, depth_only));

  // conv-chain properties dominate a dense-matrix target.
  TargetSpec dense_target;
  dense_target.mixing = op_abstract_semantics(make_dense(4), TensorShape{1, 8, 8, 4})->mixing;
  CHECK(satisfies(s, dense_target));

  TargetSpec depth4;
  depth4.depth = 4;
  PropertyState s3 = identity_state({1, 8, 8, 4});
  for (const auto& op : {make_dense(4), make_activation(OpKind::ReLU), make_dense(4)})
    s3 = *append_abstract(s3, op);
  CHECK(s3.depth.count == 3);
  CHECK_FALSE(satisfies(s3, depth4));

  // Shape satisfaction is exact equality.
  TargetSpec shape_target;
  shape_target.shape = TensorShape{1, 8, 8, 8};
  CHECK_FALSE(satisfies(s3, shape_target));

  // Incomparable dims: false, not an error.
  TargetSpec wrong_rank;
  wrong_rank.mixing = MixingMatrix::identity(3);
  CHECK_FALSE(satisfies(s3, wrong_rank));
}

TEST_CASE("property state renders with glyphs and labels") {
  const PropertyState s = identity_state({1, 8, 8, 3});
  const auto text = render_property_state(s);
  CHECK(text.find("○") != std::string::npos);
  CHECK(text.find("depth: 0") != std::string::npos);
  CHECK(text.find("(1,8,8,3)") != std::string::npos);
}

TEST_CASE("rank-2 tensors (batch, channel) work end to end") {
  const TensorShape shape{4, 8};
  PropertyState s = identity_state(shape);
  for (const auto& op : {make_dense(16), make_activation(OpKind::ReLU), make_dense(8)})
    s = *append_abstract(s, op);
  CHECK(s.depth.count == 3);
  CHECK(s.shape == TensorShape{4, 8});
  CHECK(s.mixing.letters() == "oa|xa");
  // Window ops do not apply without a spatial dimension.
  CHECK_FALSE(append_abstract(s, make_conv(8, 3, 1)).has_value());
  CHECK_FALSE(append_abstract(s, make_pool(OpKind::AveragePool, 2)).has_value());
  // The abstract table matches the oracle here too.
  CHECK(op_abstract_semantics(make_dense(16), shape)->mixing == concrete_mixing(make_dense(16), shape));
}
