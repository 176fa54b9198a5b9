#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "propsynth/ops.hpp"
#include "propsynth/shape.hpp"

namespace propsynth {

using NodeId = std::uint32_t;

struct GraphInput {
  NodeId id = 0;
  TensorShape shape;
};

struct Node {
  NodeId id = 0;
  PrimitiveOp op;
  std::vector<NodeId> inputs;  // ordered operands; node or graph-input ids
};

struct Block {
  std::string label;
  std::vector<NodeId> nodes;
};

// Immutable after construction by convention: mutation helpers return new
// graphs, so a graph value can be shared read-only across workers.
struct ComputationGraph {
  std::vector<GraphInput> inputs;
  std::vector<Node> nodes;
  std::vector<NodeId> outputs;  // node ids (or input ids for pass-through)
  std::vector<Block> blocks;

  bool is_input(NodeId id) const;
  const GraphInput* find_input(NodeId id) const;
  const Node* find_node(NodeId id) const;
  Node* find_node(NodeId id);
  const Block* find_block(const std::string& label) const;
  NodeId fresh_id() const;

  // Node ids in a topological order (inputs excluded). Empty optional when the
  // graph has a cycle or dangling operand references.
  std::optional<std::vector<NodeId>> topo_order() const;

  // Shape of every input and node. Throws std::runtime_error when the graph
  // does not shape-check; use validate() for a non-throwing report.
  std::map<NodeId, TensorShape> infer_shapes() const;

  // consumers[id] = nodes reading id, with operand index.
  std::map<NodeId, std::vector<std::pair<NodeId, int>>> consumer_map() const;
};

struct ValidationIssue {
  std::string code;  // stable machine-readable tag
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string render() const;
};

// Lists all invariant violations: duplicate/dangling ids, cycles, arity
// mismatches, unreachable nodes, shape failures, overlapping blocks.
ValidationReport validate(const ComputationGraph& g);

// Block type tag: hash of the block's op-kind sequence and boundary shape
// signature. Mutations are shared between blocks of equal type.
std::string block_type(const ComputationGraph& g, const Block& b);

// Single-chain helper used all over the tests: inputs -> op1 -> ... -> opN.
ComputationGraph chain_graph(const TensorShape& input_shape,
                             const std::vector<PrimitiveOp>& ops);

}  // namespace propsynth
