#include "propsynth/abstract.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace propsynth {

namespace {

// Positions of each input dimension covered by the preimage of the *center*
// output element. The full mixing matrix follows from these counts: the
// diagonal is always paired (every op here scans its own dimension fully),
// and an off-diagonal (out k, in l) is paired exactly when the center element
// already covers all of dimension l.
std::vector<std::int64_t> center_coverage(const PrimitiveOp& op, const TensorShape& in,
                                          const TensorShape& out) {
  const int r = in.rank();
  std::vector<std::int64_t> cnt(static_cast<std::size_t>(r), 1);
  auto window_counts = [&](std::int64_t k, std::int64_t stride, std::int64_t dilation) {
    for (int i = 0; i < in.spatial_rank(); ++i) {
      const std::int64_t center = out.spatial(i) / 2;
      cnt[static_cast<std::size_t>(i) + 1] =
          static_cast<std::int64_t>(window_positions(in.spatial(i), center, k, stride, dilation).size());
    }
  };
  switch (op.kind) {
    case OpKind::Dense:
      cnt.back() = in.channels();
      break;
    case OpKind::Convolution:
      window_counts(op.kernel(), op.stride(), 1);
      cnt.back() = in.channels();
      break;
    case OpKind::GroupedConvolution:
      window_counts(op.kernel(), op.stride(), 1);
      cnt.back() = in.channels() / op.groups();
      break;
    case OpKind::DilatedConvolution:
      window_counts(op.kernel(), 1, op.dilation());
      cnt.back() = in.channels();
      break;
    case OpKind::AveragePool:
    case OpKind::MaxPool:
      window_counts(op.window(), op.window(), 1);
      break;
    case OpKind::Softmax:
    case OpKind::LayerNorm:
      cnt.back() = in.channels();
      break;
    case OpKind::GroupNorm:
      cnt.back() = in.channels() / op.groups();
      break;
    default:
      break;  // elementwise: one position per dim
  }
  return cnt;
}

MixingMatrix mixing_from_coverage(const std::vector<std::int64_t>& cnt, const TensorShape& in) {
  const int r = in.rank();
  MixingMatrix m(r, r);
  for (int l = 0; l < r; ++l) {
    const std::int64_t extent = in.dims[static_cast<std::size_t>(l)];
    const Loc loc = loc_of_coverage(cnt[static_cast<std::size_t>(l)], extent);
    if (cnt[static_cast<std::size_t>(l)] >= extent && extent > 1) {
      // Fully covered dimension: paired with every output dim. Size-1 dims
      // pair only diagonally by convention (they carry no information).
      for (int k = 0; k < r; ++k) m.at(k, l) = loc;
    } else {
      m.at(l, l) = loc;
    }
  }
  return m;
}

}  // namespace

std::optional<AbstractOpSemantics> op_abstract_semantics(const PrimitiveOp& op, const TensorShape& in) {
  if (op.kind == OpKind::Add) return std::nullopt;  // not a sequential op
  auto out = op_output_shape(op, in);
  if (!out) return std::nullopt;

  AbstractOpSemantics sem{MixingMatrix(), op_is_linear(op.kind), *out, ShapeSig{}};
  sem.mixing = mixing_from_coverage(center_coverage(op, in, *out), in);

  switch (op.kind) {
    case OpKind::Dense:
      sem.sig = {1, true, op.features()};
      break;
    case OpKind::Convolution:
    case OpKind::GroupedConvolution:
    case OpKind::DilatedConvolution:
      sem.sig = {op.stride() > 1 ? op.stride() : 1, true, op.features()};
      break;
    case OpKind::AveragePool:
    case OpKind::MaxPool:
      sem.sig = {op.window(), false, 0};
      break;
    default:
      sem.sig = {1, false, 0};
      break;
  }
  return sem;
}

std::optional<MixingMatrix> operand_mixing(const PrimitiveOp& op, int operand, const TensorShape& in) {
  if (op.kind == OpKind::Add) {
    (void)operand;
    return MixingMatrix::identity(in.rank());
  }
  auto sem = op_abstract_semantics(op, in);
  if (!sem) return std::nullopt;
  return sem->mixing;
}

PropertyState identity_state(const TensorShape& shape) {
  return {MixingMatrix::identity(shape.rank()), DepthState{}, shape};
}

std::optional<PropertyState> append_abstract(const PropertyState& state, const PrimitiveOp& op) {
  auto sem = op_abstract_semantics(op, state.shape);
  if (!sem) return std::nullopt;
  PropertyState next;
  next.mixing = mix_compose(sem->mixing, state.mixing);
  next.depth = state.depth.appended(sem->linear);
  next.shape = sem->out_shape;
  return next;
}

std::string TargetSpec::summary() const {
  std::ostringstream os;
  bool first = true;
  auto sep = [&] {
    if (!first) os << " ";
    first = false;
  };
  if (mixing) {
    sep();
    os << "mixing=" << mixing->letters();
  }
  if (depth) {
    sep();
    os << "depth=" << *depth;
  }
  if (shape) {
    sep();
    os << "shape=" << shape->str();
  }
  if (first) os << "(empty)";
  return os.str();
}

bool satisfies(const PropertyState& props, const TargetSpec& target) {
  if (target.mixing && !target.mixing->leq(props.mixing)) return false;
  if (target.depth && *target.depth > props.depth.count) return false;
  if (target.shape && *target.shape != props.shape) return false;
  return true;
}

std::map<IoPair, PropertyState> infer_graph_properties(const ComputationGraph& g) {
  auto report = validate(g);
  if (!report.ok()) throw std::runtime_error("infer_graph_properties: invalid graph\n" + report.render());
  const auto order = *g.topo_order();
  const auto shapes = g.infer_shapes();

  std::map<IoPair, PropertyState> result;
  for (const auto& gi : g.inputs) {
    // Mixing and best alternation count per node, relative to this input.
    std::map<NodeId, MixingMatrix> mix;
    std::map<NodeId, int> depth;
    for (NodeId id : order) {
      const Node* n = g.find_node(id);
      const bool lin = op_is_linear(n->op.kind);
      MixingMatrix acc;
      bool reached = false;
      int best = -1;
      for (int j = 0; j < static_cast<int>(n->inputs.size()); ++j) {
        const NodeId o = n->inputs[j];
        MixingMatrix upstream;
        int cand = -1;
        if (o == gi.id) {
          upstream = MixingMatrix::identity(gi.shape.rank());
          cand = 1;
        } else if (mix.count(o)) {
          upstream = mix.at(o);
          const bool o_lin = op_is_linear(g.find_node(o)->op.kind);
          cand = depth.at(o) + (o_lin == lin ? 0 : 1);
        } else {
          continue;  // operand not reachable from this input
        }
        auto opm = operand_mixing(n->op, j, shapes.at(o));
        if (!opm) throw std::runtime_error("infer_graph_properties: shape rule failed mid-graph");
        MixingMatrix c = mix_compose(*opm, upstream);
        acc = reached ? loc_add(acc, c) : c;
        reached = true;
        best = std::max(best, cand);
      }
      if (reached) {
        mix.emplace(id, acc);
        depth.emplace(id, best);
      }
    }
    for (NodeId out : g.outputs) {
      PropertyState s;
      if (out == gi.id) {
        s = identity_state(gi.shape);
      } else if (mix.count(out)) {
        const bool lin = op_is_linear(g.find_node(out)->op.kind);
        s = {mix.at(out), DepthState{depth.at(out), lin ? LastKind::Linear : LastKind::Nonlinear},
             shapes.at(out)};
      } else {
        // No path: depth 0 and an all-X matrix by convention.
        s = {MixingMatrix(shapes.at(out).rank(), gi.shape.rank()), DepthState{}, shapes.at(out)};
      }
      result.emplace(IoPair{gi.id, out}, std::move(s));
    }
  }
  return result;
}

std::string render_property_state(const PropertyState& s) {
  std::ostringstream os;
  os << s.mixing.render();
  os << "depth: " << s.depth.count << "\n";
  os << "shape: " << s.shape.str() << "\n";
  return os.str();
}

}  // namespace propsynth
