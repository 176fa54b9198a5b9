#include "propsynth/graph.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "propsynth/op_semantics.hpp"

namespace propsynth {

bool ComputationGraph::is_input(NodeId id) const { return find_input(id) != nullptr; }

const GraphInput* ComputationGraph::find_input(NodeId id) const {
  for (const auto& in : inputs)
    if (in.id == id) return &in;
  return nullptr;
}

const Node* ComputationGraph::find_node(NodeId id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

Node* ComputationGraph::find_node(NodeId id) {
  for (auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const Block* ComputationGraph::find_block(const std::string& label) const {
  for (const auto& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

NodeId ComputationGraph::fresh_id() const {
  NodeId next = 0;
  for (const auto& in : inputs) next = std::max(next, in.id + 1);
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

std::optional<std::vector<NodeId>> ComputationGraph::topo_order() const {
  std::map<NodeId, int> pending;  // unresolved operand count
  std::map<NodeId, std::vector<NodeId>> dependents;
  for (const auto& n : nodes) {
    int unresolved = 0;
    for (NodeId in : n.inputs) {
      if (is_input(in)) continue;
      if (!find_node(in)) return std::nullopt;  // dangling reference
      ++unresolved;
      dependents[in].push_back(n.id);
    }
    pending[n.id] = unresolved;
  }
  std::vector<NodeId> ready;
  for (const auto& n : nodes)
    if (pending[n.id] == 0) ready.push_back(n.id);
  std::sort(ready.begin(), ready.end());

  std::vector<NodeId> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    // Smallest id first keeps the order deterministic.
    NodeId id = ready.front();
    ready.erase(ready.begin());
    order.push_back(id);
    auto it = dependents.find(id);
    if (it == dependents.end()) continue;
    for (NodeId d : it->second)
      if (--pending[d] == 0) ready.insert(std::lower_bound(ready.begin(), ready.end(), d), d);
  }
  if (order.size() != nodes.size()) return std::nullopt;  // cycle
  return order;
}

std::map<NodeId, TensorShape> ComputationGraph::infer_shapes() const {
  auto order = topo_order();
  if (!order) throw std::runtime_error("infer_shapes: graph has a cycle or dangling operands");
  std::map<NodeId, TensorShape> shapes;
  for (const auto& in : inputs) {
    if (!in.shape.valid()) throw std::runtime_error("infer_shapes: invalid input shape " + in.shape.str());
    shapes[in.id] = in.shape;
  }
  for (NodeId id : *order) {
    const Node* n = find_node(id);
    std::vector<TensorShape> ins;
    for (NodeId op_in : n->inputs) {
      auto it = shapes.find(op_in);
      if (it == shapes.end()) throw std::runtime_error("infer_shapes: operand not yet shaped");
      ins.push_back(it->second);
    }
    auto out = op_output_shape(n->op, ins);
    if (!out)
      throw std::runtime_error("infer_shapes: " + n->op.display() + " inapplicable at node " +
                               std::to_string(id));
    shapes[id] = *out;
  }
  return shapes;
}

std::map<NodeId, std::vector<std::pair<NodeId, int>>> ComputationGraph::consumer_map() const {
  std::map<NodeId, std::vector<std::pair<NodeId, int>>> consumers;
  for (const auto& n : nodes)
    for (int i = 0; i < static_cast<int>(n.inputs.size()); ++i)
      consumers[n.inputs[i]].push_back({n.id, i});
  return consumers;
}

std::string ValidationReport::render() const {
  std::ostringstream os;
  for (const auto& issue : issues) os << "[" << issue.code << "] " << issue.message << "\n";
  return os.str();
}

ValidationReport validate(const ComputationGraph& g) {
  ValidationReport rep;
  auto add = [&](const std::string& code, const std::string& msg) { rep.issues.push_back({code, msg}); };

  std::set<NodeId> ids;
  for (const auto& in : g.inputs) {
    if (!ids.insert(in.id).second) add("duplicate-id", "duplicate id " + std::to_string(in.id));
    if (!in.shape.valid()) add("bad-shape", "input " + std::to_string(in.id) + " has invalid shape " + in.shape.str());
  }
  if (g.inputs.empty()) add("no-inputs", "graph has no inputs");
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second) add("duplicate-id", "duplicate id " + std::to_string(n.id));
    std::string why;
    if (!op_params_valid(n.op, &why))
      add("bad-params", "node " + std::to_string(n.id) + " " + n.op.display() + ": " + why);
    if (static_cast<int>(n.inputs.size()) != n.op.arity())
      add("arity", "node " + std::to_string(n.id) + " " + op_kind_name(n.op.kind) + " expects " +
                       std::to_string(n.op.arity()) + " inputs, has " + std::to_string(n.inputs.size()));
    for (NodeId in : n.inputs)
      if (!ids.count(in) && !g.find_node(in) && !g.is_input(in))
        add("dangling", "node " + std::to_string(n.id) + " reads unknown id " + std::to_string(in));
  }
  for (NodeId out : g.outputs)
    if (!g.find_node(out) && !g.is_input(out))
      add("dangling-output", "output references unknown id " + std::to_string(out));

  auto order = g.topo_order();
  if (!order) {
    add("cycle", "graph is cyclic or has dangling operands");
    return rep;  // structural failure blocks the remaining checks
  }

  // Reachability from graph inputs.
  std::set<NodeId> reachable;
  for (const auto& in : g.inputs) reachable.insert(in.id);
  for (NodeId id : *order) {
    const Node* n = g.find_node(id);
    bool any = n->inputs.empty();
    for (NodeId in : n->inputs) any = any || reachable.count(in);
    if (any) reachable.insert(id);
  }
  for (const auto& n : g.nodes)
    if (!reachable.count(n.id))
      add("unreachable", "node " + std::to_string(n.id) + " unreachable from graph inputs");

  if (rep.ok()) {
    try {
      g.infer_shapes();
    } catch (const std::exception& e) {
      add("shape", e.what());
    }
  }

  std::set<NodeId> in_block;
  for (const auto& b : g.blocks)
    for (NodeId id : b.nodes) {
      if (!g.find_node(id)) add("block", "block " + b.label + " lists unknown node " + std::to_string(id));
      if (!in_block.insert(id).second)
        add("block-overlap", "node " + std::to_string(id) + " appears in two blocks");
    }
  return rep;
}

std::string block_type(const ComputationGraph& g, const Block& b) {
  // Kind sequence in topo order plus boundary shape signature.
  auto order = g.topo_order();
  std::ostringstream os;
  std::set<NodeId> members(b.nodes.begin(), b.nodes.end());
  std::map<NodeId, TensorShape> shapes;
  try {
    shapes = g.infer_shapes();
  } catch (const std::exception&) {
  }
  if (order)
    for (NodeId id : *order)
      if (members.count(id)) os << op_kind_name(g.find_node(id)->op.kind) << "|";
  os << "#";
  if (order && !shapes.empty()) {
    for (NodeId id : *order) {
      if (!members.count(id)) continue;
      const Node* n = g.find_node(id);
      for (NodeId in : n->inputs)
        if (!members.count(in)) os << "i" << shapes[in].str();
    }
    auto consumers = g.consumer_map();
    for (NodeId id : *order) {
      if (!members.count(id)) continue;
      bool external = false;
      for (auto [c, _] : consumers[id])
        if (!members.count(c)) external = true;
      for (NodeId out : g.outputs)
        if (out == id) external = true;
      if (external) os << "o" << shapes[id].str();
    }
  }
  return std::to_string(std::hash<std::string>{}(os.str()));
}

ComputationGraph chain_graph(const TensorShape& input_shape, const std::vector<PrimitiveOp>& ops) {
  ComputationGraph g;
  g.inputs.push_back({0, input_shape});
  NodeId prev = 0;
  NodeId next = 1;
  for (const auto& op : ops) {
    g.nodes.push_back({next, op, {prev}});
    prev = next++;
  }
  g.outputs.push_back(prev);
  return g;
}

}  // namespace propsynth
