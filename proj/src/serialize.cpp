#include "propsynth/serialize.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace propsynth {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json params_to_json(const std::map<std::string, double>& params) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : params) {
    if (v == static_cast<std::int64_t>(v))
      j[k] = static_cast<std::int64_t>(v);
    else
      j[k] = v;
  }
  return j;
}

}  // namespace

std::string to_text(const ComputationGraph& g) {
  ordered_json j;
  j["format_version"] = 1;
  j["inputs"] = ordered_json::array();
  for (const auto& in : g.inputs) {
    ordered_json ji;
    ji["id"] = in.id;
    ji["shape"] = in.shape.dims;
    j["inputs"].push_back(ji);
  }
  j["nodes"] = ordered_json::array();
  for (const auto& n : g.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = op_kind_name(n.op.kind);
    jn["params"] = params_to_json(n.op.params);
    jn["inputs"] = n.inputs;
    j["nodes"].push_back(jn);
  }
  j["outputs"] = g.outputs;
  j["blocks"] = ordered_json::array();
  for (const auto& b : g.blocks) {
    ordered_json jb;
    jb["label"] = b.label;
    jb["nodes"] = b.nodes;
    j["blocks"].push_back(jb);
  }
  return j.dump(2) + "\n";
}

ComputationGraph from_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("graph parse error at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    if (!j.is_object()) throw ParseError("graph document must be a JSON object");
    if (j.value("format_version", 0) != 1) throw ParseError("unsupported or missing format_version");
    ComputationGraph g;
    for (const auto& ji : j.at("inputs")) {
      GraphInput in;
      in.id = ji.at("id").get<NodeId>();
      in.shape.dims = ji.at("shape").get<std::vector<std::int64_t>>();
      g.inputs.push_back(in);
    }
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<NodeId>();
      const std::string kind = jn.at("kind").get<std::string>();
      auto k = op_kind_from_name(kind);
      if (!k) throw ParseError("node " + std::to_string(n.id) + ": unknown kind '" + kind + "'");
      n.op.kind = *k;
      if (jn.contains("params"))
        for (const auto& [pk, pv] : jn.at("params").items()) n.op.params[pk] = pv.get<double>();
      n.inputs = jn.at("inputs").get<std::vector<NodeId>>();
      g.nodes.push_back(n);
    }
    g.outputs = j.at("outputs").get<std::vector<NodeId>>();
    if (j.contains("blocks"))
      for (const auto& jb : j.at("blocks")) {
        Block b;
        b.label = jb.at("label").get<std::string>();
        b.nodes = jb.at("nodes").get<std::vector<NodeId>>();
        g.blocks.push_back(b);
      }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph document malformed: ") + e.what());
  }
}

ComputationGraph load_graph_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open graph file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

void save_graph_file(const ComputationGraph& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write graph file: " + path);
  f << to_text(g);
}

std::string to_dot(const ComputationGraph& g) {
  std::ostringstream os;
  os << "digraph G {\n  rankdir=TB;\n";
  for (const auto& in : g.inputs)
    os << "  n" << in.id << " [shape=ellipse,label=\"input " << in.shape.str() << "\"];\n";
  for (const auto& n : g.nodes)
    os << "  n" << n.id << " [shape=box,label=\"" << n.op.display() << "\"];\n";
  for (const auto& n : g.nodes)
    for (NodeId in : n.inputs) os << "  n" << in << " -> n" << n.id << ";\n";
  for (std::size_t i = 0; i < g.outputs.size(); ++i) {
    os << "  out" << i << " [shape=ellipse,label=\"output " << i << "\"];\n";
    os << "  n" << g.outputs[i] << " -> out" << i << ";\n";
  }
  os << "}\n";
  return os.str();
}

std::string canonical_text(const ComputationGraph& g) {
  auto order = g.topo_order();
  if (!order) return to_text(g);  // cyclic graphs keep their raw form

  // Bottom-up structural keys make the numbering independent of the original
  // ids, so isomorphic graphs serialize identically (up to interchangeable
  // identical parallel branches).
  std::map<NodeId, std::string> key;
  for (std::size_t i = 0; i < g.inputs.size(); ++i)
    key[g.inputs[i].id] = "in" + std::to_string(i);
  for (NodeId id : *order) {
    const Node* n = g.find_node(id);
    std::string k = n->op.display() + "(";
    for (NodeId in : n->inputs) k += key.at(in) + ",";
    key[id] = k + ")";
  }
  std::stable_sort(order->begin(), order->end(),
                   [&](NodeId a, NodeId b) { return key.at(a) < key.at(b); });

  std::map<NodeId, NodeId> remap;
  NodeId next = 0;
  for (const auto& in : g.inputs) remap[in.id] = next++;
  for (NodeId id : *order) remap[id] = next++;

  ComputationGraph c;
  for (const auto& in : g.inputs) c.inputs.push_back({remap.at(in.id), in.shape});
  for (NodeId id : *order) {
    const Node* n = g.find_node(id);
    Node m{remap.at(id), n->op, {}};
    for (NodeId in : n->inputs) m.inputs.push_back(remap.at(in));
    c.nodes.push_back(m);
  }
  for (NodeId out : g.outputs) c.outputs.push_back(remap.at(out));
  for (const auto& b : g.blocks) {
    Block nb{b.label, {}};
    for (NodeId id : b.nodes)
      if (remap.count(id)) nb.nodes.push_back(remap.at(id));
    std::sort(nb.nodes.begin(), nb.nodes.end());
    c.blocks.push_back(nb);
  }
  return to_text(c);
}

}  // namespace propsynth
