#include "propsynth/subgraph.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace propsynth {

namespace {

std::set<NodeId> forward_reach(const ComputationGraph& g, const std::set<NodeId>& from) {
  auto consumers = g.consumer_map();
  std::set<NodeId> seen;
  std::vector<NodeId> stack(from.begin(), from.end());
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    for (auto [c, _] : consumers[id])
      if (seen.insert(c).second) stack.push_back(c);
  }
  return seen;
}

std::set<NodeId> backward_reach(const ComputationGraph& g, const std::set<NodeId>& from) {
  std::set<NodeId> seen;
  std::vector<NodeId> stack(from.begin(), from.end());
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    const Node* n = g.find_node(id);
    if (!n) continue;
    for (NodeId in : n->inputs)
      if (seen.insert(in).second) stack.push_back(in);
  }
  return seen;
}

}  // namespace

bool selection_connected(const ComputationGraph& g, const std::set<NodeId>& nodes) {
  if (nodes.empty()) return false;
  std::set<NodeId> seen{*nodes.begin()};
  std::vector<NodeId> stack{*nodes.begin()};
  auto consumers = g.consumer_map();
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    const Node* n = g.find_node(id);
    if (n)
      for (NodeId in : n->inputs)
        if (nodes.count(in) && seen.insert(in).second) stack.push_back(in);
    for (auto [c, _] : consumers[id])
      if (nodes.count(c) && seen.insert(c).second) stack.push_back(c);
  }
  return seen.size() == nodes.size();
}

bool selection_convex(const ComputationGraph& g, const std::set<NodeId>& nodes) {
  const auto down = forward_reach(g, nodes);
  const auto up = backward_reach(g, nodes);
  for (NodeId id : down)
    if (!nodes.count(id) && up.count(id)) return false;
  return true;
}

SubgraphSelection make_selection(const ComputationGraph& g, const std::set<NodeId>& nodes) {
  if (nodes.empty()) throw std::invalid_argument("make_selection: empty node set");
  for (NodeId id : nodes)
    if (!g.find_node(id)) throw std::invalid_argument("make_selection: unknown node " + std::to_string(id));
  if (!selection_connected(g, nodes)) throw std::invalid_argument("make_selection: not connected");
  if (!selection_convex(g, nodes)) throw std::invalid_argument("make_selection: not convex");

  SubgraphSelection sel;
  sel.nodes.assign(nodes.begin(), nodes.end());
  for (NodeId id : sel.nodes) {
    const Node* n = g.find_node(id);
    for (int i = 0; i < static_cast<int>(n->inputs.size()); ++i)
      if (!nodes.count(n->inputs[i])) sel.boundary_inputs.push_back({n->inputs[i], id, i});
  }
  std::sort(sel.boundary_inputs.begin(), sel.boundary_inputs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.consumer, a.operand) < std::tie(b.consumer, b.operand);
  });
  auto consumers = g.consumer_map();
  for (NodeId id : sel.nodes) {
    bool external = false;
    for (auto [c, _] : consumers[id])
      if (!nodes.count(c)) external = true;
    for (NodeId out : g.outputs)
      if (out == id) external = true;
    if (external) sel.boundary_outputs.push_back(id);
  }
  if (sel.boundary_outputs.empty())
    throw std::invalid_argument("make_selection: selection has no outputs");
  return sel;
}

SubgraphSelection select_subgraph(const ComputationGraph& g, const std::string& block_label,
                                  Rng& rng, double mean_size) {
  const Block* block = g.find_block(block_label);
  if (!block) throw std::invalid_argument("select_subgraph: no block '" + block_label + "'");
  if (block->nodes.empty()) throw std::invalid_argument("select_subgraph: block '" + block_label + "' is empty");

  std::vector<NodeId> members = block->nodes;
  std::sort(members.begin(), members.end());
  std::set<NodeId> member_set(members.begin(), members.end());

  std::set<NodeId> sel{members[rng.uniform_index(members.size())]};
  const double continue_prob = mean_size <= 1.0 ? 0.0 : 1.0 - 1.0 / mean_size;
  auto consumers = g.consumer_map();
  while (rng.coin(continue_prob)) {
    std::vector<NodeId> candidates;
    for (NodeId id : sel) {
      const Node* n = g.find_node(id);
      for (NodeId in : n->inputs)
        if (member_set.count(in) && !sel.count(in)) candidates.push_back(in);
      for (auto [c, _] : consumers[id])
        if (member_set.count(c) && !sel.count(c)) candidates.push_back(c);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                    [&](NodeId c) {
                                      auto grown = sel;
                                      grown.insert(c);
                                      return !selection_convex(g, grown);
                                    }),
                     candidates.end());
    if (candidates.empty()) break;
    sel.insert(candidates[rng.uniform_index(candidates.size())]);
  }
  return make_selection(g, sel);
}

Decomposition decompose_sequential(const ComputationGraph& g, const SubgraphSelection& sel) {
  std::set<NodeId> inside(sel.nodes.begin(), sel.nodes.end());
  auto consumers = g.consumer_map();

  // Number of distinct "uses" of a node's value: inside consumers, plus one
  // when the value leaves the selection (outside consumer or graph output).
  auto use_count = [&](NodeId id) {
    int inside_uses = 0;
    bool external = false;
    for (auto [c, _] : consumers[id]) {
      if (inside.count(c))
        ++inside_uses;
      else
        external = true;
    }
    for (NodeId out : g.outputs)
      if (out == id) external = true;
    return inside_uses + (external ? 1 : 0);
  };
  auto sole_inside_consumer = [&](NodeId id) -> const Node* {
    const Node* hit = nullptr;
    for (auto [c, _] : consumers[id])
      if (inside.count(c)) hit = g.find_node(c);
    return hit;
  };

  Decomposition dec;
  std::map<NodeId, int> connector_index;
  for (NodeId id : sel.nodes)
    if (g.find_node(id)->op.arity() != 1) {
      connector_index[id] = static_cast<int>(dec.connectors.size());
      dec.connectors.push_back({id, {}});
    }

  auto is_connector = [&](NodeId id) { return connector_index.count(id) > 0; };

  // Chain starts: simple nodes whose producer cannot extend the chain.
  std::map<NodeId, int> chain_of_end;  // last node of chain -> chain index
  for (NodeId id : sel.nodes) {
    const Node* n = g.find_node(id);
    if (n->op.arity() != 1) continue;
    const NodeId p = n->inputs[0];
    const bool extends = inside.count(p) && !is_connector(p) && use_count(p) == 1;
    if (extends) continue;
    DecChain chain;
    chain.nodes.push_back(id);
    NodeId last = id;
    while (use_count(last) == 1) {
      const Node* next = sole_inside_consumer(last);
      if (!next || next->op.arity() != 1) break;
      chain.nodes.push_back(next->id);
      last = next->id;
    }
    chain_of_end[last] = static_cast<int>(dec.chains.size());
    dec.chains.push_back(std::move(chain));
  }

  auto boundary_index = [&](NodeId producer, NodeId consumer, int operand) {
    for (std::size_t i = 0; i < sel.boundary_inputs.size(); ++i) {
      const auto& e = sel.boundary_inputs[i];
      if (e.producer == producer && e.consumer == consumer && e.operand == operand)
        return static_cast<int>(i);
    }
    throw std::logic_error("decompose_sequential: boundary edge not found");
  };
  auto attach = [&](NodeId producer, NodeId consumer, int operand) -> Attachment {
    if (!inside.count(producer))
      return {Attachment::Kind::BoundaryInput, boundary_index(producer, consumer, operand)};
    if (is_connector(producer)) return {Attachment::Kind::Connector, connector_index.at(producer)};
    auto it = chain_of_end.find(producer);
    if (it == chain_of_end.end())
      throw std::logic_error("decompose_sequential: producer is mid-chain");
    return {Attachment::Kind::Chain, it->second};
  };

  for (auto& chain : dec.chains) {
    const Node* first = g.find_node(chain.nodes.front());
    chain.source = attach(first->inputs[0], first->id, 0);
  }
  for (auto& conn : dec.connectors) {
    const Node* n = g.find_node(conn.node);
    for (int i = 0; i < static_cast<int>(n->inputs.size()); ++i)
      conn.operands.push_back(attach(n->inputs[i], conn.node, i));
  }
  for (NodeId out : sel.boundary_outputs) {
    if (is_connector(out))
      dec.outputs.push_back({Attachment::Kind::Connector, connector_index.at(out)});
    else
      dec.outputs.push_back({Attachment::Kind::Chain, chain_of_end.at(out)});
  }
  return dec;
}

ComputationGraph reassemble(const ComputationGraph& g, const SubgraphSelection& sel,
                            const Decomposition& dec,
                            const std::vector<std::vector<PrimitiveOp>>& chain_ops) {
  if (chain_ops.size() != dec.chains.size())
    throw std::invalid_argument("reassemble: need one op sequence per chain");
  const auto shapes = g.infer_shapes();

  ComputationGraph frag;
  for (std::size_t i = 0; i < sel.boundary_inputs.size(); ++i)
    frag.inputs.push_back({static_cast<NodeId>(i), shapes.at(sel.boundary_inputs[i].producer)});
  NodeId next_id = static_cast<NodeId>(sel.boundary_inputs.size());

  // Emit chains/connectors in dependency order.
  std::vector<NodeId> chain_out(dec.chains.size(), 0);
  std::vector<NodeId> conn_out(dec.connectors.size(), 0);
  std::vector<bool> chain_done(dec.chains.size(), false);
  std::vector<bool> conn_done(dec.connectors.size(), false);

  auto resolved = [&](const Attachment& a) {
    switch (a.kind) {
      case Attachment::Kind::BoundaryInput: return true;
      case Attachment::Kind::Chain: return bool(chain_done[static_cast<std::size_t>(a.index)]);
      case Attachment::Kind::Connector: return bool(conn_done[static_cast<std::size_t>(a.index)]);
    }
    return false;
  };
  auto value_of = [&](const Attachment& a) -> NodeId {
    switch (a.kind) {
      case Attachment::Kind::BoundaryInput: return static_cast<NodeId>(a.index);
      case Attachment::Kind::Chain: return chain_out[static_cast<std::size_t>(a.index)];
      case Attachment::Kind::Connector: return conn_out[static_cast<std::size_t>(a.index)];
    }
    return 0;
  };

  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = 0; i < dec.chains.size(); ++i) {
      if (chain_done[i] || !resolved(dec.chains[i].source)) continue;
      NodeId cur = value_of(dec.chains[i].source);
      for (const auto& op : chain_ops[i]) {
        frag.nodes.push_back({next_id, op, {cur}});
        cur = next_id++;
      }
      chain_out[i] = cur;  // empty chain passes its source through
      chain_done[i] = true;
      progress = true;
    }
    for (std::size_t i = 0; i < dec.connectors.size(); ++i) {
      if (conn_done[i]) continue;
      bool ready = true;
      for (const auto& a : dec.connectors[i].operands) ready = ready && resolved(a);
      if (!ready) continue;
      std::vector<NodeId> operands;
      for (const auto& a : dec.connectors[i].operands) operands.push_back(value_of(a));
      frag.nodes.push_back({next_id, g.find_node(dec.connectors[i].node)->op, operands});
      conn_out[i] = next_id++;
      conn_done[i] = true;
      progress = true;
    }
  }
  for (std::size_t i = 0; i < dec.chains.size(); ++i)
    if (!chain_done[i]) throw std::logic_error("reassemble: unresolved chain");
  for (std::size_t i = 0; i < dec.connectors.size(); ++i)
    if (!conn_done[i]) throw std::logic_error("reassemble: unresolved connector");

  for (const auto& a : dec.outputs) frag.outputs.push_back(value_of(a));
  return frag;
}

ComputationGraph replace_subgraph(const ComputationGraph& g, const SubgraphSelection& sel,
                                  const ComputationGraph& fragment) {
  if (fragment.inputs.size() != sel.boundary_inputs.size())
    throw std::invalid_argument("replace_subgraph: boundary input arity mismatch");
  if (fragment.outputs.size() != sel.boundary_outputs.size())
    throw std::invalid_argument("replace_subgraph: boundary output arity mismatch");

  ComputationGraph out;
  out.inputs = g.inputs;
  std::set<NodeId> removed(sel.nodes.begin(), sel.nodes.end());
  for (const auto& n : g.nodes)
    if (!removed.count(n.id)) out.nodes.push_back(n);

  // Splice fragment nodes under fresh ids; fragment inputs map to the
  // boundary producers.
  NodeId base = g.fresh_id();
  std::map<NodeId, NodeId> remap;
  for (std::size_t i = 0; i < fragment.inputs.size(); ++i)
    remap[fragment.inputs[i].id] = sel.boundary_inputs[i].producer;
  std::vector<NodeId> added;
  for (const auto& n : fragment.nodes) {
    NodeId id = base++;
    remap[n.id] = id;
    added.push_back(id);
  }
  for (const auto& n : fragment.nodes) {
    Node m{remap.at(n.id), n.op, {}};
    for (NodeId in : n.inputs) m.inputs.push_back(remap.at(in));
    out.nodes.push_back(m);
  }

  // Rewire external readers of each boundary output.
  std::map<NodeId, NodeId> out_value;
  for (std::size_t i = 0; i < sel.boundary_outputs.size(); ++i)
    out_value[sel.boundary_outputs[i]] = remap.at(fragment.outputs[i]);
  for (auto& n : out.nodes) {
    if (std::find(added.begin(), added.end(), n.id) != added.end()) continue;
    for (auto& in : n.inputs) {
      auto it = out_value.find(in);
      if (it != out_value.end()) in = it->second;
    }
  }
  out.outputs = g.outputs;
  for (auto& o : out.outputs) {
    auto it = out_value.find(o);
    if (it != out_value.end()) o = it->second;
  }

  // Block bookkeeping: replaced nodes leave their block, new ones join the
  // block that held the selection.
  for (const auto& b : g.blocks) {
    Block nb{b.label, {}};
    bool held_selection = false;
    for (NodeId id : b.nodes) {
      if (removed.count(id))
        held_selection = true;
      else
        nb.nodes.push_back(id);
    }
    if (held_selection)
      for (NodeId id : added) nb.nodes.push_back(id);
    std::sort(nb.nodes.begin(), nb.nodes.end());
    out.blocks.push_back(nb);
  }

  auto report = validate(out);
  if (!report.ok())
    throw std::runtime_error("replace_subgraph: result fails validation\n" + report.render());
  return out;
}

}  // namespace propsynth
