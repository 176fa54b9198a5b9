#pragma once

#include <stdexcept>
#include <string>

#include "propsynth/graph.hpp"

namespace propsynth {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Graph file format: a single JSON document with fields
// {format_version, inputs, nodes:[{id, kind, params, inputs}], outputs, blocks}
// in that order, so that serialized graphs diff cleanly.
std::string to_text(const ComputationGraph& g);

// Throws ParseError with a byte offset for malformed JSON, or a field path for
// semantically invalid content. Does not run validate().
ComputationGraph from_text(const std::string& text);

ComputationGraph load_graph_file(const std::string& path);
void save_graph_file(const ComputationGraph& g, const std::string& path);

// DOT export; node label = kind+params.
std::string to_dot(const ComputationGraph& g);

// Serialization of the graph with ids renumbered into a canonical order;
// equal strings imply isomorphic graphs for the structures produced here.
std::string canonical_text(const ComputationGraph& g);

}  // namespace propsynth
