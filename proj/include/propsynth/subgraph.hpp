#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "propsynth/graph.hpp"
#include "propsynth/rng.hpp"

namespace propsynth {

struct BoundaryInputEdge {
  NodeId producer;  // outside the selection (node or graph input)
  NodeId consumer;  // inside the selection
  int operand;      // operand slot of the consumer
};

struct SubgraphSelection {
  std::vector<NodeId> nodes;  // ascending
  std::vector<BoundaryInputEdge> boundary_inputs;
  std::vector<NodeId> boundary_outputs;  // ascending; read outside or graph outputs

  bool contains(NodeId id) const {
    return std::binary_search(nodes.begin(), nodes.end(), id);
  }
};

bool selection_connected(const ComputationGraph& g, const std::set<NodeId>& nodes);
// No path that leaves the node set and re-enters it.
bool selection_convex(const ComputationGraph& g, const std::set<NodeId>& nodes);

// Builds a selection with deterministic boundary ordering; throws
// std::invalid_argument when the set is empty, not connected, or not convex.
SubgraphSelection make_selection(const ComputationGraph& g, const std::set<NodeId>& nodes);

// Random walk from a seed node inside the block, growing while convexity
// holds, stopping geometrically so the expected size is `mean_size`.
// Throws std::invalid_argument when the block is missing or empty.
SubgraphSelection select_subgraph(const ComputationGraph& g, const std::string& block_label,
                                  Rng& rng, double mean_size = 3.0);

// Skeleton of a selection: maximal sequential chains of single-input ops,
// joined by binary connectors, boundary inputs and tap points.
struct Attachment {
  enum class Kind : std::uint8_t { BoundaryInput, Connector, Chain } kind;
  int index = 0;
  bool operator==(const Attachment&) const = default;
};

struct DecChain {
  std::vector<NodeId> nodes;  // in dataflow order
  Attachment source;
};

struct DecConnector {
  NodeId node;
  std::vector<Attachment> operands;
};

struct Decomposition {
  std::vector<DecChain> chains;
  std::vector<DecConnector> connectors;
  std::vector<Attachment> outputs;  // aligned with selection.boundary_outputs
};

Decomposition decompose_sequential(const ComputationGraph& g, const SubgraphSelection& sel);

// Builds a replacement fragment from the skeleton with each chain's ops
// replaced; inputs of the fragment are the selection's boundary inputs in
// order. Passing the original chain ops reproduces the selection.
ComputationGraph reassemble(const ComputationGraph& g, const SubgraphSelection& sel,
                            const Decomposition& dec,
                            const std::vector<std::vector<PrimitiveOp>>& chain_ops);

// Splices a fragment in place of a selection. Nodes outside the selection are
// untouched. Throws std::invalid_argument on boundary arity mismatch and
// std::runtime_error when the resulting graph fails validation.
ComputationGraph replace_subgraph(const ComputationGraph& g, const SubgraphSelection& sel,
                                  const ComputationGraph& fragment);

}  // namespace propsynth
