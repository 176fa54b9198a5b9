#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "propsynth/graph.hpp"
#include "propsynth/mixing.hpp"
#include "propsynth/op_semantics.hpp"
#include "propsynth/ops.hpp"
#include "propsynth/shape.hpp"

namespace propsynth {

enum class LastKind : std::uint8_t { None, Linear, Nonlinear };

// Depth with the alternation rule: consecutive ops of the same linearity kind
// do not increase the count; the first op always counts 1.
struct DepthState {
  int count = 0;
  LastKind last = LastKind::None;

  DepthState appended(bool linear_op) const {
    const LastKind k = linear_op ? LastKind::Linear : LastKind::Nonlinear;
    if (k == last) return {count, last};
    return {count + 1, k};
  }
  bool operator==(const DepthState& o) const { return count == o.count && last == o.last; }
};

// Encodes what an op does to a shape, independent of the concrete shape value;
// used for abstract-equivalence classes.
struct ShapeSig {
  std::int64_t spatial_divisor = 1;
  bool sets_channel = false;
  std::int64_t channel = 0;
  bool operator==(const ShapeSig&) const = default;
};

struct AbstractOpSemantics {
  MixingMatrix mixing;  // square at the given input rank
  bool linear = true;
  TensorShape out_shape;
  ShapeSig sig;

  std::string key() const {
    return mixing.letters() + (linear ? "#lin#" : "#nonlin#") + std::to_string(sig.spatial_divisor) +
           "/" + (sig.sets_channel ? "c" + std::to_string(sig.channel) : "keep");
  }
};

// Hand-specified abstract semantics of a single-input op at a concrete input
// shape. The mixing entries follow the center-evaluation convention, so they
// coincide with the concrete oracle entrywise. nullopt when the op does not
// apply at this shape.
std::optional<AbstractOpSemantics> op_abstract_semantics(const PrimitiveOp& op, const TensorShape& in);

// Per-operand mixing for graph propagation; Add contributes identity per slot.
std::optional<MixingMatrix> operand_mixing(const PrimitiveOp& op, int operand, const TensorShape& in);

struct PropertyState {
  MixingMatrix mixing;
  DepthState depth;
  TensorShape shape;
};

PropertyState identity_state(const TensorShape& shape);

// Abstractly appends an op to a sequential state; nullopt when the shape
// transform fails (the op is infeasible at this point).
std::optional<PropertyState> append_abstract(const PropertyState& state, const PrimitiveOp& op);

struct TargetSpec {
  std::optional<MixingMatrix> mixing;
  std::optional<int> depth;
  std::optional<TensorShape> shape;

  bool any() const { return mixing || depth || shape; }
  std::string summary() const;
};

// Satisfaction: every present component must be dominated by the inferred one
// (mixing entrywise, depth by <=, shape by exact equality).
bool satisfies(const PropertyState& props, const TargetSpec& target);

using IoPair = std::pair<NodeId, NodeId>;

// Properties for every (graph input, graph output) pair, by a single forward
// scan in topological order per input. Pairs with no path get depth 0 and an
// all-X mixing matrix. Throws when the graph does not validate.
std::map<IoPair, PropertyState> infer_graph_properties(const ComputationGraph& g);

std::string render_property_state(const PropertyState& s);

}  // namespace propsynth
