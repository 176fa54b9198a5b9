#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "propsynth/abstract.hpp"
#include "propsynth/oracle.hpp"

using namespace propsynth;

namespace {

DenseTensor filled(const TensorShape& s, std::initializer_list<double> v) {
  DenseTensor t(s);
  REQUIRE(t.v.size() == v.size());
  std::copy(v.begin(), v.end(), t.v.begin());
  return t;
}

}  // namespace

TEST_CASE("ScalarMultiply scales elementwise") {
  const WeightAssignment w(1);
  const auto out = eval_op(make_scalar_multiply(2.5), filled({1, 2, 2, 1}, {1, -2, 0, 4}), w);
  CHECK(out.v == std::vector<double>{2.5, -5, 0, 10});
}

TEST_CASE("ReLU clamps negatives") {
  const WeightAssignment w(1);
  const auto out = eval_op(make_activation(OpKind::ReLU), filled({1, 3, 1, 1}, {-1, 0, 2}), w);
  CHECK(out.v == std::vector<double>{0, 0, 2});
}

TEST_CASE("a 3x3 convolution with a center-delta kernel is a dense projection") {
  const TensorShape shape{1, 5, 5, 3};
  const WeightAssignment w(99);
  DenseTensor x(shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = 0.1 * static_cast<double>(i) - 3.0;
  const auto conv_delta = eval_op(make_conv(4, 3, 1), x, w.with_center_tap_only());
  const auto dense = eval_op(make_dense(4), x, w);
  REQUIRE(conv_delta.shape == dense.shape);
  for (std::size_t i = 0; i < dense.v.size(); ++i)
    CHECK(conv_delta.v[i] == doctest::Approx(dense.v[i]).epsilon(1e-12));
}

TEST_CASE("eval_op rejects incompatible shapes") {
  const WeightAssignment w(1);
  CHECK_THROWS_AS(eval_op(make_pool(OpKind::AveragePool, 2), DenseTensor({1, 5, 5, 2}), w),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval_op(make_add(), {DenseTensor({1, 2, 2, 2}), DenseTensor({1, 2, 2, 3})}, w),
                  std::invalid_argument);
}

TEST_CASE("contribution pattern of ReLU is the identity relation") {
  const auto p = contribution_pattern(make_activation(OpKind::ReLU), {1, 3, 3, 2});
  const std::int64_t n = p.in_shape.elements();
  for (std::int64_t o = 0; o < n; ++o)
    for (std::int64_t i = 0; i < n; ++i) CHECK(p.contributes(o, i) == (o == i));
}

TEST_CASE("contribution pattern of Dense mixes channels only") {
  const auto p = contribution_pattern(make_dense(3), {1, 4, 4, 3});
  DenseTensor in_helper(p.in_shape), out_helper(p.out_shape);
  for (std::int64_t o = 0; o < p.out_shape.elements(); ++o) {
    const auto oi = out_helper.unflat(o);
    for (std::int64_t i = 0; i < p.in_shape.elements(); ++i) {
      const auto ii = in_helper.unflat(i);
      const bool same_position = oi[0] == ii[0] && oi[1] == ii[1] && oi[2] == ii[2];
      CHECK(p.contributes(o, i) == same_position);
    }
  }
}

TEST_CASE("conv center output element reads its 3x3xC window") {
  const TensorShape shape{1, 5, 5, 3};
  const auto p = contribution_pattern(make_conv(2, 3, 1), shape);
  DenseTensor in_helper(shape), out_helper(p.out_shape);
  const std::int64_t center = out_helper.flat({0, 2, 2, 0});
  for (std::int64_t i = 0; i < shape.elements(); ++i) {
    const auto ii = in_helper.unflat(i);
    const bool in_window = ii[1] >= 1 && ii[1] <= 3 && ii[2] >= 1 && ii[2] <= 3;
    CHECK(p.contributes(center, i) == in_window);
  }
}

TEST_CASE("conv mixing at (2,5,5,3) reproduces the reference table") {
  const MixingMatrix m = concrete_mixing(make_conv(4, 3, 1), {2, 5, 5, 3});
  CHECK(m.letters() == "oxxa|xmxa|xxma|xxxa");
  // Pairing bits: batch row pairs with batch and channel, spatial rows with
  // themselves and channel, channel row with channel only.
  const bool expected_pairing[4][4] = {
      {true, false, false, true},
      {false, true, false, true},
      {false, false, true, true},
      {false, false, false, true},
  };
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK((m.at(r, c) > Loc::X) == expected_pairing[r][c]);
}

TEST_CASE("dense mixing differs from conv only on the spatial diagonal") {
  const MixingMatrix dense = concrete_mixing(make_dense(4), {2, 5, 5, 3});
  CHECK(dense.letters() == "oxxa|xoxa|xxoa|xxxa");
  const MixingMatrix conv = concrete_mixing(make_conv(4, 3, 1), {2, 5, 5, 3});
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if ((r == 1 && c == 1) || (r == 2 && c == 2)) {
        CHECK(dense.at(r, c) == Loc::O);
        CHECK(conv.at(r, c) == Loc::M);
      } else {
        CHECK(dense.at(r, c) == conv.at(r, c));
      }
    }
  CHECK(dense.leq(conv));  // conv is strictly more expressive
}

TEST_CASE("average pool mixing at (1,4,4,2): spatial many-to-one, no channel mixing") {
  const MixingMatrix m = concrete_mixing(make_pool(OpKind::AveragePool, 2), {1, 4, 4, 2});
  CHECK(m.at(1, 1) == Loc::M);
  CHECK(m.at(2, 2) == Loc::M);
  CHECK(m.at(3, 3) == Loc::O);
  for (int r = 0; r < 4; ++r)
    if (r != 3) CHECK(m.at(r, 3) == Loc::X);  // channel column stays diagonal
  auto sem = op_abstract_semantics(make_pool(OpKind::AveragePool, 2), TensorShape{1, 4, 4, 2});
  REQUIRE(sem.has_value());
  CHECK(m == sem->mixing);
}

TEST_CASE("max pool under generic-position analysis matches average pool") {
  const MixingMatrix avg = concrete_mixing(make_pool(OpKind::AveragePool, 2), {2, 4, 4, 2});
  const MixingMatrix mx = concrete_mixing(make_pool(OpKind::MaxPool, 2), {2, 4, 4, 2});
  CHECK(avg == mx);
}

TEST_CASE("softmax couples the whole channel dimension") {
  const MixingMatrix m = concrete_mixing(make_activation(OpKind::Softmax), {2, 4, 4, 3});
  CHECK(m.letters() == "oxxa|xoxa|xxoa|xxxa");  // dense-shaped, via the normalizing sum
}

TEST_CASE("grouped convolution limits channel locality to its group") {
  const MixingMatrix m = concrete_mixing(make_grouped_conv(8, 3, 2), {2, 6, 6, 8});
  CHECK(m.at(3, 3) == Loc::M);  // half the channels
  CHECK(m.at(0, 3) == Loc::X);  // no full-channel pairing with other dims
  CHECK(m.at(1, 1) == Loc::M);
}

TEST_CASE("linearity table: witnesses on both sides") {
  const TensorShape s{1, 4, 4, 4};
  CHECK(linearity_test(make_dense(4), s));
  CHECK(linearity_test(make_conv(4, 3, 1), s));
  CHECK(linearity_test(make_pool(OpKind::AveragePool, 2), s));
  CHECK(linearity_test(make_batch_norm(), s));
  CHECK(linearity_test(make_layer_norm(), s));
  CHECK(linearity_test(make_group_norm(2), s));
  CHECK(linearity_test(make_scalar_multiply(0.5), s));
  CHECK(linearity_test(make_dropout(0.2), s));
  CHECK(linearity_test(make_add(), s));

  CHECK_FALSE(linearity_test(make_activation(OpKind::ReLU), s));
  CHECK_FALSE(linearity_test(make_activation(OpKind::GeLU), s));
  CHECK_FALSE(linearity_test(make_activation(OpKind::SiLU), s));
  CHECK_FALSE(linearity_test(make_activation(OpKind::Sigmoid), s));
  CHECK_FALSE(linearity_test(make_activation(OpKind::Softmax), s));
  CHECK_FALSE(linearity_test(make_pool(OpKind::MaxPool, 2), s));
}

TEST_CASE("linearity table agrees with op_is_linear for a default catalog") {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const TensorShape s{1, 4, 4, 4};
  for (const auto& op : op_catalog(cfg)) {
    if (!op_output_shape(op, std::vector<TensorShape>(static_cast<std::size_t>(op.arity()), s)))
      continue;
    CHECK_MESSAGE(linearity_test(op, s) == op_is_linear(op.kind), op.display());
  }
}

TEST_CASE("oracle refuses shapes beyond the element cap") {
  OracleOptions opt;
  opt.element_cap = 64;
  CHECK_THROWS_AS(contribution_pattern(make_dense(4), {1, 8, 8, 8}, opt), std::invalid_argument);
}

TEST_CASE("oracle is deterministic and policy-independent") {
  OracleOptions serial, parallel;
  parallel.policy = ExecPolicy::Parallel;
  const auto a = concrete_mixing(make_conv(4, 3, 1), {2, 5, 5, 3}, serial);
  const auto b = concrete_mixing(make_conv(4, 3, 1), {2, 5, 5, 3}, parallel);
  CHECK(a == b);
}
