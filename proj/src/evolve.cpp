#include "propsynth/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "propsynth/serialize.hpp"

namespace propsynth {

double metric_value(const Metrics& m, const std::string& objective) {
  if (objective == "accuracy_proxy") return m.accuracy_proxy;
  if (objective == "flops") return m.flops;
  if (objective == "params") return m.params;
  if (objective == "throughput_proxy") return m.throughput_proxy;
  throw std::invalid_argument("unknown objective: " + objective);
}

bool objective_maximizes(const std::string& objective) {
  return objective == "accuracy_proxy" || objective == "throughput_proxy";
}

CostEstimate static_cost_model(const ComputationGraph& g) {
  CostEstimate total;
  const auto shapes = g.infer_shapes();
  for (const auto& n : g.nodes) {
    const TensorShape& out = shapes.at(n.id);
    const TensorShape& in = shapes.at(n.inputs[0]);
    const double elems_out = static_cast<double>(out.elements());
    const double cin = static_cast<double>(in.channels());
    const double cout = static_cast<double>(out.channels());
    double flops = 0.0, params = 0.0;
    switch (n.op.kind) {
      case OpKind::Dense:
        flops = 2.0 * cin * elems_out;
        params = cin * cout + cout;
        break;
      case OpKind::Convolution:
      case OpKind::GroupedConvolution:
      case OpKind::DilatedConvolution: {
        const double g_ = static_cast<double>(n.op.kind == OpKind::GroupedConvolution ? n.op.groups() : 1);
        const double taps = std::pow(static_cast<double>(n.op.kernel()), in.spatial_rank());
        flops = 2.0 * taps * (cin / g_) * elems_out;
        params = taps * (cin / g_) * cout + cout;
        break;
      }
      case OpKind::Add:
      case OpKind::ScalarMultiply:
      case OpKind::ReLU:
        flops = elems_out;
        break;
      case OpKind::GeLU:
      case OpKind::SiLU:
      case OpKind::Sigmoid:
        flops = 4.0 * elems_out;
        break;
      case OpKind::Softmax:
        flops = 5.0 * elems_out;
        break;
      case OpKind::BatchNorm:
        flops = 2.0 * elems_out;
        params = 2.0 * cout;
        break;
      case OpKind::LayerNorm:
      case OpKind::GroupNorm:
        flops = 4.0 * elems_out;
        params = 2.0 * cout;
        break;
      case OpKind::Dropout:
        flops = 0.0;
        break;
      case OpKind::AveragePool:
      case OpKind::MaxPool:
        flops = std::pow(static_cast<double>(n.op.window()), in.spatial_rank()) * elems_out;
        break;
    }
    total.flops += flops;
    total.params += params;
  }
  return total;
}

double surrogate_accuracy(const ComputationGraph& g, std::uint64_t seed) {
  const auto props = infer_graph_properties(g);
  int depth = 0;
  int mixing_a = 0;
  for (const auto& [io, s] : props) {
    depth = std::max(depth, s.depth.count);
    int a = 0;
    for (int r = 0; r < s.mixing.rows(); ++r)
      for (int c = 0; c < s.mixing.cols(); ++c)
        if (s.mixing.at(r, c) == Loc::A) ++a;
    mixing_a = std::max(mixing_a, a);
  }
  const double params = static_cost_model(g).params;

  std::uint64_t h = seed;
  for (char c : canonical_text(g)) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  const double noise = (std::ldexp(static_cast<double>(h >> 11), -53) - 0.5) * 0.001;

  double score = 0.30;
  score += 0.40 * (1.0 - std::exp(-0.15 * depth));
  score += 0.20 * (1.0 - std::exp(-0.10 * mixing_a));
  score -= 0.08 * std::max(0.0, std::log10(params + 1.0) - 5.0);
  score += noise;
  return std::min(1.0, std::max(0.0, score));
}

Evaluator make_default_evaluator(std::uint64_t seed) {
  return [seed](const ComputationGraph& g, std::int64_t id) {
    Metrics m;
    const CostEstimate c = static_cost_model(g);
    m.flops = c.flops;
    m.params = c.params;
    m.accuracy_proxy = surrogate_accuracy(g, splitmix64(seed ^ static_cast<std::uint64_t>(id)));
    m.throughput_proxy = 1e9 / (1.0 + c.flops);
    return m;
  };
}

TargetSpec mutate_properties(const PropertyState& props, Rng& rng, const EvolveConfig& cfg) {
  TargetSpec t;
  MixingMatrix m = props.mixing;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (r != c && m.at(r, c) > Loc::X && rng.coin(cfg.pairing_drop_prob)) m.at(r, c) = Loc::X;
  t.mixing = m;

  int d = props.depth.count;
  if (!rng.coin(cfg.depth_keep_prob)) {
    static const int deltas[4] = {-2, -1, 1, 2};
    d = std::max(0, d + deltas[rng.uniform_index(4)]);
  }
  t.depth = d;

  if (rng.coin(cfg.shape_keep_prob)) t.shape = props.shape;
  return t;
}

namespace {

// Topologically ordered members of a block.
std::vector<NodeId> block_topo(const ComputationGraph& g, const Block& b) {
  std::set<NodeId> members(b.nodes.begin(), b.nodes.end());
  std::vector<NodeId> ordered;
  for (NodeId id : *g.topo_order())
    if (members.count(id)) ordered.push_back(id);
  return ordered;
}

std::optional<Individual> mutate_subgraph(const ComputationGraph& g, Rng& rng,
                                          const EvolveConfig& cfg) {
  std::vector<const Block*> blocks;
  for (const auto& b : g.blocks)
    if (!b.nodes.empty()) blocks.push_back(&b);
  if (blocks.empty()) return std::nullopt;
  const Block* block = blocks[rng.uniform_index(blocks.size())];

  SubgraphSelection sel;
  try {
    sel = select_subgraph(g, block->label, rng, cfg.mean_subgraph_size);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  const Decomposition dec = decompose_sequential(g, sel);
  const auto states = chain_property_states(g, sel, dec);
  std::vector<TargetSpec> targets;
  for (const auto& s : states) targets.push_back(mutate_properties(s, rng, cfg));

  auto plan = plan_replacement(g, sel, targets, cfg.synth, rng);
  if (!plan) return std::nullopt;
  ComputationGraph out;
  try {
    out = apply_replacement(g, sel, *plan);
  } catch (const std::exception&) {
    return std::nullopt;
  }

  // Share the concrete mutation with other blocks of the same type.
  const std::string type = block_type(g, *block);
  const auto ordered_src = block_topo(g, *block);
  std::vector<int> positions;
  for (std::size_t i = 0; i < ordered_src.size(); ++i)
    if (sel.contains(ordered_src[i])) positions.push_back(static_cast<int>(i));
  int shared = 0;
  for (const auto& b : g.blocks) {
    if (b.label == block->label || b.nodes.empty()) continue;
    if (block_type(g, b) != type) continue;
    if (!rng.coin(cfg.share_prob)) continue;
    const auto ordered_dst = block_topo(out, b);
    if (ordered_dst.size() != ordered_src.size()) continue;
    std::set<NodeId> mapped;
    for (int p : positions) mapped.insert(ordered_dst[static_cast<std::size_t>(p)]);
    try {
      const SubgraphSelection sel_b = make_selection(out, mapped);
      out = apply_replacement(out, sel_b, *plan);
      ++shared;
    } catch (const std::exception&) {
      continue;  // sibling not structurally compatible after all
    }
  }

  Individual child;
  child.graph = std::move(out);
  std::ostringstream detail;
  detail << "block=" << block->label << " nodes=" << sel.nodes.size() << " chains=" << plan->size()
         << " shared=" << shared;
  child.mutation = {"subgraph", detail.str()};
  return child;
}

// Pass-through fragment: one input wired straight to the output.
ComputationGraph passthrough_fragment(const TensorShape& shape) {
  ComputationGraph f;
  f.inputs.push_back({0, shape});
  f.outputs.push_back(0);
  return f;
}

std::optional<Individual> mutate_block_delete(const ComputationGraph& g, Rng& rng,
                                              const EvolveConfig& cfg) {
  (void)cfg;
  std::vector<const Block*> blocks;
  for (const auto& b : g.blocks)
    if (!b.nodes.empty()) blocks.push_back(&b);
  if (blocks.size() < 2) return std::nullopt;  // keep at least one block
  const Block* victim = blocks[rng.uniform_index(blocks.size())];
  try {
    const auto sel = make_selection(g, std::set<NodeId>(victim->nodes.begin(), victim->nodes.end()));
    if (sel.boundary_inputs.size() != 1 || sel.boundary_outputs.size() != 1) return std::nullopt;
    const auto shapes = g.infer_shapes();
    ComputationGraph out =
        replace_subgraph(g, sel, passthrough_fragment(shapes.at(sel.boundary_inputs[0].producer)));
    out.blocks.erase(std::remove_if(out.blocks.begin(), out.blocks.end(),
                                    [&](const Block& b) { return b.label == victim->label; }),
                     out.blocks.end());
    Individual child;
    child.graph = std::move(out);
    child.mutation = {"block-delete", "block=" + victim->label};
    return child;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<Individual> mutate_block_duplicate(const ComputationGraph& g, Rng& rng,
                                                 const EvolveConfig& cfg) {
  std::vector<const Block*> blocks;
  for (const auto& b : g.blocks)
    if (!b.nodes.empty()) blocks.push_back(&b);
  if (blocks.empty()) return std::nullopt;
  const Block* src = blocks[rng.uniform_index(blocks.size())];
  const Block* at = blocks[rng.uniform_index(blocks.size())];  // insert before this block
  if (static_cast<int>(g.nodes.size() + src->nodes.size()) > cfg.max_nodes) return std::nullopt;
  try {
    const auto sel_src = make_selection(g, std::set<NodeId>(src->nodes.begin(), src->nodes.end()));
    const auto sel_at = make_selection(g, std::set<NodeId>(at->nodes.begin(), at->nodes.end()));
    if (sel_src.boundary_inputs.size() != 1 || sel_src.boundary_outputs.size() != 1) return std::nullopt;
    if (sel_at.boundary_inputs.size() != 1) return std::nullopt;

    ComputationGraph out = g;
    NodeId base = out.fresh_id();
    std::map<NodeId, NodeId> remap;
    const NodeId splice_producer = sel_at.boundary_inputs[0].producer;
    remap[sel_src.boundary_inputs[0].producer] = splice_producer;
    Block copy;
    for (NodeId id : block_topo(g, *src)) {
      const Node* n = g.find_node(id);
      Node m{base, n->op, {}};
      for (NodeId in : n->inputs) m.inputs.push_back(remap.count(in) ? remap.at(in) : in);
      remap[id] = base;
      copy.nodes.push_back(base);
      out.nodes.push_back(m);
      ++base;
    }
    const NodeId copy_out = remap.at(sel_src.boundary_outputs[0]);
    // The insertion block now reads the copy instead of its old producer.
    for (const auto& e : sel_at.boundary_inputs) {
      Node* consumer = out.find_node(e.consumer);
      consumer->inputs[static_cast<std::size_t>(e.operand)] = copy_out;
    }
    int suffix = 0;
    std::string label;
    do {
      label = src->label + "_copy" + std::to_string(suffix++);
    } while (out.find_block(label));
    copy.label = label;
    out.blocks.push_back(copy);

    auto rep = validate(out);
    if (!rep.ok()) return std::nullopt;
    Individual child;
    child.graph = std::move(out);
    child.mutation = {"block-duplicate", "block=" + src->label + " before=" + at->label};
    return child;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::optional<Individual> mutate_individual(const Individual& parent, Rng& rng,
                                            const EvolveConfig& cfg) {
  const double total = cfg.p_subgraph + cfg.p_delete + cfg.p_duplicate;
  const double pick = rng.uniform01() * total;
  std::optional<Individual> child;
  if (pick < cfg.p_subgraph)
    child = mutate_subgraph(parent.graph, rng, cfg);
  else if (pick < cfg.p_subgraph + cfg.p_delete)
    child = mutate_block_delete(parent.graph, rng, cfg);
  else
    child = mutate_block_duplicate(parent.graph, rng, cfg);
  if (child && static_cast<int>(child->graph.nodes.size()) > cfg.max_nodes) return std::nullopt;
  if (child && !validate(child->graph).ok()) return std::nullopt;
  return child;
}

namespace {

struct CanonPoint {
  double x, y;  // min-min space
};

CanonPoint canonical(const Metrics& m, const ObjectivePair& obj) {
  const double p = metric_value(m, obj.primary);
  const double s = metric_value(m, obj.secondary);
  return {objective_maximizes(obj.secondary) ? -s : s, objective_maximizes(obj.primary) ? -p : p};
}

bool strictly_dominates(const CanonPoint& a, const CanonPoint& b) {
  return a.x < b.x && a.y < b.y;  // strict improvement on all objectives
}

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::min(1.0, std::max(0.0, t));
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

ParetoContext build_pareto_context(const std::vector<Metrics>& points, const ObjectivePair& obj) {
  ParetoContext ctx;
  std::vector<CanonPoint> canon;
  for (const auto& m : points) canon.push_back(canonical(m, obj));

  bool flat = true;
  for (const auto& c : canon) flat = flat && c.x == canon.front().x;
  if (flat && canon.size() > 1) {
    ctx.flat_secondary = true;
    return ctx;
  }

  std::vector<CanonPoint> nd;
  for (std::size_t i = 0; i < canon.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < canon.size(); ++j)
      if (j != i && strictly_dominates(canon[j], canon[i])) dominated = true;
    if (!dominated) nd.push_back(canon[i]);
  }
  std::sort(nd.begin(), nd.end(), [](const CanonPoint& a, const CanonPoint& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  nd.erase(std::unique(nd.begin(), nd.end(),
                       [](const CanonPoint& a, const CanonPoint& b) { return a.x == b.x && a.y == b.y; }),
           nd.end());
  for (const auto& p : nd) ctx.curve.push_back({p.x, p.y});

  // Normalization: the endpoint slope of the full curve.
  if (ctx.curve.size() >= 2) {
    const auto& first = ctx.curve.front();
    const auto& last = ctx.curve.back();
    const double dx = last.first - first.first;
    const double dy = last.second - first.second;
    if (dx != 0.0 && dy != 0.0) ctx.y_scale = std::fabs(dx / dy);
  }
  return ctx;
}

double pareto_weight(const Metrics& point, const std::vector<Metrics>& population,
                     const ObjectivePair& obj) {
  return pareto_weight(point, population, obj, build_pareto_context(population, obj));
}

double pareto_weight(const Metrics& point, const std::vector<Metrics>& population,
                     const ObjectivePair& obj, const ParetoContext& ctx) {
  const CanonPoint p = canonical(point, obj);

  bool dominated = false;
  for (const auto& m : population)
    if (strictly_dominates(canonical(m, obj), p)) dominated = true;
  if (!dominated) return 0.0;  // Pareto optimal

  if (ctx.flat_secondary) {
    double best = canonical(population.front(), obj).y;
    for (const auto& m : population) best = std::min(best, canonical(m, obj).y);
    return p.y - best;
  }
  if (ctx.curve.size() == 1)
    return std::fabs(p.x - ctx.curve[0].first) + std::fabs(p.y - ctx.curve[0].second);

  double best = HUGE_VAL;
  for (std::size_t i = 0; i + 1 < ctx.curve.size(); ++i)
    best = std::min(best, point_segment_distance(p.x, p.y * ctx.y_scale, ctx.curve[i].first,
                                                 ctx.curve[i].second * ctx.y_scale,
                                                 ctx.curve[i + 1].first,
                                                 ctx.curve[i + 1].second * ctx.y_scale));
  return best;
}

std::size_t select(const std::vector<Individual>& population, const std::string& primary,
                   const std::vector<std::string>& secondaries, double k_percent, Rng& rng,
                   SelectionTrace* trace) {
  if (population.empty()) throw std::invalid_argument("select: empty population");
  const std::string secondary = secondaries[rng.uniform_index(secondaries.size())];
  const ObjectivePair obj{primary, secondary};
  std::vector<Metrics> points;
  for (const auto& ind : population) points.push_back(ind.metrics);

  const ParetoContext ctx = build_pareto_context(points, obj);
  std::vector<std::pair<double, std::size_t>> weighted;
  for (std::size_t i = 0; i < population.size(); ++i)
    weighted.push_back({pareto_weight(points[i], points, obj, ctx), i});
  std::stable_sort(weighted.begin(), weighted.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  });
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(k_percent / 100.0 * static_cast<double>(population.size()))));
  const std::size_t top_n = std::min(keep, weighted.size());
  const std::size_t winner = weighted[rng.uniform_index(top_n)].second;
  if (trace) {
    trace->secondary = secondary;
    trace->top.clear();
    for (std::size_t i = 0; i < top_n; ++i) trace->top.push_back(weighted[i].second);
  }
  return winner;
}

PopulationHistory evolve(const ComputationGraph& seed_graph, const Evaluator& evaluator,
                         const EvolveConfig& cfg, Rng& rng) {
  auto rep = validate(seed_graph);
  if (!rep.ok()) throw std::invalid_argument("evolve: seed graph invalid\n" + rep.render());

  PopulationHistory h;
  for (int k = 0; k < 2; ++k) {  // the base model is evaluated twice
    Individual ind;
    ind.id = static_cast<std::int64_t>(h.individuals.size());
    ind.graph = seed_graph;
    ind.metrics = evaluator(seed_graph, ind.id);
    ind.mutation = {"seed", ""};
    h.individuals.push_back(std::move(ind));
  }

  for (int trial = 0; trial < cfg.trials; ++trial) {
    TrialRecord rec;
    rec.trial = trial;
    const std::size_t parent_idx =
        select(h.individuals, cfg.primary_objective, cfg.secondary_objectives, cfg.k_percent, rng);
    rec.parent = h.individuals[parent_idx].id;

    std::optional<Individual> child;
    for (int attempt = 0; attempt < cfg.mutation_retries && !child; ++attempt)
      child = mutate_individual(h.individuals[parent_idx], rng, cfg);
    if (!child) {
      rec.note = "mutation failed";
      h.trials.push_back(rec);
      continue;
    }
    child->id = static_cast<std::int64_t>(h.individuals.size());
    child->parent = rec.parent;
    try {
      child->metrics = evaluator(child->graph, child->id);
    } catch (const std::exception& e) {
      rec.note = std::string("evaluator failed: ") + e.what();
      h.trials.push_back(rec);
      continue;
    }
    rec.produced = true;
    rec.individual = child->id;
    rec.note = child->mutation.kind;
    h.individuals.push_back(std::move(*child));
    h.trials.push_back(rec);
  }
  return h;
}

std::vector<std::size_t> pareto_front(const std::vector<Individual>& individuals,
                                      const ObjectivePair& obj) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < individuals.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < individuals.size(); ++j)
      if (j != i &&
          strictly_dominates(canonical(individuals[j].metrics, obj), canonical(individuals[i].metrics, obj)))
        dominated = true;
    if (!dominated) front.push_back(i);
  }
  return front;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string history_to_jsonl(const PopulationHistory& h) {
  std::ostringstream os;
  for (const auto& ind : h.individuals) {
    os << "{\"individual\":" << ind.id << ",\"parent\":" << ind.parent << ",\"mutation\":\""
       << ind.mutation.kind << "\",\"detail\":\"" << ind.mutation.detail << "\""
       << ",\"accuracy_proxy\":" << fmt_double(ind.metrics.accuracy_proxy)
       << ",\"flops\":" << fmt_double(ind.metrics.flops) << ",\"params\":" << fmt_double(ind.metrics.params)
       << ",\"throughput_proxy\":" << fmt_double(ind.metrics.throughput_proxy) << ",\"graph\":\"graph_"
       << ind.id << ".json\"}\n";
  }
  for (const auto& t : h.trials) {
    os << "{\"trial\":" << t.trial << ",\"parent\":" << t.parent
       << ",\"produced\":" << (t.produced ? "true" : "false") << ",\"individual\":" << t.individual
       << ",\"note\":\"" << t.note << "\"}\n";
  }
  return os.str();
}

std::string pareto_front_csv(const PopulationHistory& h, const ObjectivePair& obj) {
  std::ostringstream os;
  os << "individual," << obj.primary << "," << obj.secondary << "\n";
  for (std::size_t i : pareto_front(h.individuals, obj)) {
    const auto& ind = h.individuals[i];
    os << ind.id << "," << fmt_double(metric_value(ind.metrics, obj.primary)) << ","
       << fmt_double(metric_value(ind.metrics, obj.secondary)) << "\n";
  }
  return os.str();
}

}  // namespace propsynth
