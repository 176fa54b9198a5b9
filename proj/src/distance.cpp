#include "propsynth/distance.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

namespace propsynth {

Distance d_mixing(const MixingMatrix& u, const MixingMatrix& v) {
  if (!u.same_dims(v)) return Distance::infinite();
  return Distance::finite(mixing_deficit(u, v));
}

Distance d_depth(int u, int v) { return Distance::finite(std::max(0, v - u)); }

Distance d_shape(const TensorShape& a, const TensorShape& b) {
  if (a.rank() != b.rank() || a.batch() != b.batch()) return Distance::infinite();
  std::int64_t ratio = -1;
  std::int64_t d = a.channels() != b.channels() ? 1 : 0;
  for (int i = 0; i < a.spatial_rank(); ++i) {
    if (a.spatial(i) % b.spatial(i) != 0) return Distance::infinite();
    const std::int64_t r = a.spatial(i) / b.spatial(i);
    if (ratio == -1) ratio = r;
    if (r != ratio) return Distance::infinite();
    d += r - 1;
  }
  return Distance::finite(d);
}

std::vector<TensorShape> reachable_probe_shapes(const std::vector<PrimitiveOp>& catalog,
                                                const TensorShape& shape) {
  std::set<std::int64_t> divisor_steps;
  std::set<std::int64_t> channels{shape.channels()};
  for (const auto& op : catalog) {
    switch (op.kind) {
      case OpKind::AveragePool:
      case OpKind::MaxPool:
        divisor_steps.insert(op.window());
        break;
      case OpKind::Convolution:
      case OpKind::GroupedConvolution:
      case OpKind::DilatedConvolution:
        if (op.stride() > 1) divisor_steps.insert(op.stride());
        channels.insert(op.features());
        break;
      case OpKind::Dense:
        channels.insert(op.features());
        break;
      default:
        break;
    }
  }
  std::set<std::int64_t> divisors{1};
  if (shape.spatial_rank() > 0) {  // window ops need a spatial dim to divide
    std::vector<std::int64_t> frontier{1};
    while (!frontier.empty()) {
      std::vector<std::int64_t> next;
      for (auto d : frontier)
        for (auto s : divisor_steps) {
          const std::int64_t nd = d * s;
          bool ok = true;
          for (int i = 0; i < shape.spatial_rank(); ++i) ok = ok && shape.spatial(i) % nd == 0;
          if (ok && divisors.insert(nd).second) next.push_back(nd);
        }
      frontier = std::move(next);
    }
  }
  std::vector<TensorShape> probes;
  for (auto d : divisors)
    for (auto c : channels) {
      TensorShape s = shape;
      for (int i = 0; i < s.spatial_rank(); ++i) s.spatial(i) /= d;
      s.dims.back() = c;
      probes.push_back(s);
      if (probes.size() >= 64) return probes;
    }
  return probes;
}

namespace {

MixingMatrix closure_over(const MixingMatrix& u0, const std::vector<MixingMatrix>& op_mats) {
  MixingMatrix u = u0;
  // The lattice is finite, so this terminates.
  for (;;) {
    MixingMatrix next = u;
    for (const auto& m : op_mats) next = loc_add(next, mix_compose(m, u));
    if (next == u) return u;
    u = next;
  }
}

}  // namespace

MixingMatrix mixing_closure(const MixingMatrix& u0, const std::vector<PrimitiveOp>& catalog,
                            const TensorShape& shape) {
  std::vector<MixingMatrix> op_mats;
  for (const auto& op : catalog) {
    if (op.arity() != 1) continue;
    auto sem = op_abstract_semantics(op, shape);
    if (sem && sem->mixing.rows() == u0.rows()) op_mats.push_back(sem->mixing);
  }
  return closure_over(u0, op_mats);
}

MixingMatrix mixing_closure_reachable(const MixingMatrix& u0,
                                      const std::vector<PrimitiveOp>& catalog,
                                      const TensorShape& shape) {
  // Memoized: evaluators are rebuilt per task but almost always share the
  // catalog, shape and identity start.
  static std::mutex cache_mutex;
  static std::map<std::string, MixingMatrix> cache;
  std::string key = shape.str() + "#" + u0.letters() + "#";
  for (const auto& op : catalog) key += op.display() + ";";
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  std::vector<MixingMatrix> op_mats;
  for (const auto& probe : reachable_probe_shapes(catalog, shape))
    for (const auto& op : catalog) {
      if (op.arity() != 1) continue;
      auto sem = op_abstract_semantics(op, probe);
      if (sem && sem->mixing.rows() == u0.rows()) op_mats.push_back(sem->mixing);
    }
  MixingMatrix result = closure_over(u0, op_mats);
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache.emplace(key, result);
  return result;
}

bool feasible_mixing(const MixingMatrix& u0, const MixingMatrix& v,
                     const std::vector<PrimitiveOp>& catalog, const TensorShape& shape) {
  if (!u0.same_dims(v)) return false;
  return v.leq(mixing_closure(u0, catalog, shape));
}

TargetSpec relax_target_for_missing_shape(TargetSpec target,
                                          const std::vector<PrimitiveOp>& catalog,
                                          const TensorShape& input_shape) {
  if (target.shape || !target.mixing) return target;
  const MixingMatrix closure =
      mixing_closure(MixingMatrix::identity(input_shape.rank()), catalog, input_shape);
  if (!target.mixing->same_dims(closure)) return target;
  MixingMatrix relaxed = *target.mixing;
  for (int r = 0; r < relaxed.rows(); ++r)
    for (int c = 0; c < relaxed.cols(); ++c)
      relaxed.at(r, c) = std::min(relaxed.at(r, c), closure.at(r, c));
  target.mixing = relaxed;
  return target;
}

bool feasible_shape(const TensorShape& from, const TensorShape& to,
                    const std::vector<PrimitiveOp>& catalog) {
  if (from.rank() != to.rank() || from.batch() != to.batch()) return false;
  std::int64_t ratio = -1;
  for (int i = 0; i < from.spatial_rank(); ++i) {
    if (from.spatial(i) % to.spatial(i) != 0) return false;
    const std::int64_t r = from.spatial(i) / to.spatial(i);
    if (ratio == -1) ratio = r;
    if (r != ratio) return false;
  }
  std::set<std::int64_t> divisor_steps;
  std::set<std::int64_t> channels;
  for (const auto& op : catalog) {
    switch (op.kind) {
      case OpKind::AveragePool:
      case OpKind::MaxPool:
        divisor_steps.insert(op.window());
        break;
      case OpKind::Convolution:
      case OpKind::GroupedConvolution:
      case OpKind::DilatedConvolution:
        if (op.stride() > 1) divisor_steps.insert(op.stride());
        channels.insert(op.features());
        break;
      case OpKind::Dense:
        channels.insert(op.features());
        break;
      default:
        break;
    }
  }
  if (to.channels() != from.channels() && !channels.count(to.channels())) return false;
  std::function<bool(std::int64_t)> composable = [&](std::int64_t r) {
    if (r == 1) return true;
    for (auto d : divisor_steps)
      if (r % d == 0 && composable(r / d)) return true;
    return false;
  };
  return ratio <= 1 || composable(ratio);
}

DistanceEvaluator::DistanceEvaluator(TargetSpec target, const std::vector<PrimitiveOp>& catalog,
                                     const TensorShape& initial_shape)
    : target_(std::move(target)) {
  if (target_.mixing) {
    const MixingMatrix id = MixingMatrix::identity(initial_shape.rank());
    mixing_feasible_ = target_.mixing->same_dims(id) &&
                       target_.mixing->leq(mixing_closure_reachable(id, catalog, initial_shape));
  }
  if (target_.shape) shape_feasible_ = feasible_shape(initial_shape, *target_.shape, catalog);
}

Distance DistanceEvaluator::mixing_component(const PropertyState& s) const {
  if (!target_.mixing) return Distance::finite(0);
  if (!mixing_feasible_) return Distance::infinite();
  return d_mixing(s.mixing, *target_.mixing);
}

Distance DistanceEvaluator::depth_component(const PropertyState& s) const {
  if (!target_.depth) return Distance::finite(0);
  return d_depth(s.depth.count, *target_.depth);
}

Distance DistanceEvaluator::shape_component(const PropertyState& s) const {
  if (!target_.shape) return Distance::finite(0);
  if (!shape_feasible_) return Distance::infinite();
  return d_shape(s.shape, *target_.shape);
}

Distance DistanceEvaluator::total(const PropertyState& s) const {
  return mixing_component(s) + depth_component(s) + shape_component(s);
}

Distance d_total(const PropertyState& s, const TargetSpec& target,
                 const std::vector<PrimitiveOp>& catalog, const TensorShape& initial_shape) {
  return DistanceEvaluator(target, catalog, initial_shape).total(s);
}

std::string CoveringReport::render() const {
  std::ostringstream os;
  os << "covering: " << covered << "/" << samples << " sampled tasks reduced by >= 1; "
     << monotonicity_checks << " monotonicity checks, " << violations.size() << " violations\n";
  for (const auto& v : violations) os << "  [" << v.kind << "] " << v.detail << "\n";
  return os.str();
}

namespace {

// Random chain from the catalog; gives (ops, final state). Retries ops whose
// shape transform fails at the current state.
std::vector<PrimitiveOp> random_chain(const std::vector<PrimitiveOp>& catalog, PropertyState& state,
                                      int len, Rng& rng) {
  std::vector<PrimitiveOp> ops;
  for (int i = 0; i < len; ++i) {
    bool appended = false;
    for (int attempt = 0; attempt < 16 && !appended; ++attempt) {
      const auto& op = catalog[rng.uniform_index(catalog.size())];
      if (op.arity() != 1) continue;
      if (auto next = append_abstract(state, op)) {
        state = *next;
        ops.push_back(op);
        appended = true;
      }
    }
    if (!appended) break;
  }
  return ops;
}

}  // namespace

CoveringReport covering_check(const std::vector<PrimitiveOp>& catalog, const CoveringCheckOptions& opt) {
  CoveringReport rep;
  struct Sample {
    PropertyState state;
    TargetSpec target;
    TensorShape initial_shape;
  };
  std::vector<Sample> samples;
  Rng rng(opt.seed);
  int guard = 0;
  while (static_cast<int>(samples.size()) < opt.samples && guard++ < opt.samples * 20) {
    const TensorShape& shape = opt.shapes[rng.uniform_index(opt.shapes.size())];
    PropertyState target_state = identity_state(shape);
    random_chain(catalog, target_state, 1 + static_cast<int>(rng.uniform_index(
                                                static_cast<std::uint64_t>(opt.max_chain_len))),
                 rng);
    TargetSpec target;
    if (rng.coin(0.8)) target.mixing = target_state.mixing;
    if (rng.coin(0.8)) target.depth = target_state.depth.count;
    if (rng.coin(0.5)) target.shape = target_state.shape;
    if (!target.any()) target.depth = target_state.depth.count;
    target = relax_target_for_missing_shape(target, catalog, shape);

    PropertyState state = identity_state(shape);
    if (rng.coin(0.5))
      random_chain(catalog, state,
                   static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(opt.max_chain_len))),
                   rng);
    DistanceEvaluator ev(target, catalog, shape);
    const Distance d = ev.total(state);
    if (d.inf || d.zero()) continue;  // covering speaks only to 0 < d < inf
    samples.push_back({state, target, shape});
  }
  rep.samples = static_cast<int>(samples.size());

  std::vector<int> covered(samples.size(), 0);
  std::vector<std::vector<CoveringViolation>> violations(samples.size());
  parallel_for(opt.policy, static_cast<std::int64_t>(samples.size()), [&](std::int64_t si) {
    const auto& s = samples[static_cast<std::size_t>(si)];
    DistanceEvaluator ev(s.target, catalog, s.initial_shape);
    const Distance d0 = ev.total(s.state);
    const Distance dm0 = ev.mixing_component(s.state);
    const Distance dd0 = ev.depth_component(s.state);
    bool any_progress = false;
    for (const auto& op : catalog) {
      if (op.arity() != 1) continue;
      auto next = append_abstract(s.state, op);
      if (!next) continue;
      const Distance d1 = ev.total(*next);
      if (!d1.inf && d1.value + opt.epsilon <= d0.value) any_progress = true;
      const Distance dm1 = ev.mixing_component(*next);
      const Distance dd1 = ev.depth_component(*next);
      if (dm0 < dm1 || dd0 < dd1)
        violations[static_cast<std::size_t>(si)].push_back(
            {"monotonicity", op.display() + " increased d_mixing/d_depth (" + dm0.str() + "->" +
                                 dm1.str() + ", " + dd0.str() + "->" + dd1.str() + ") target " +
                                 s.target.summary()});
    }
    if (any_progress) covered[static_cast<std::size_t>(si)] = 1;
    if (!any_progress)
      violations[static_cast<std::size_t>(si)].push_back(
          {"covering", "no op reduced d_total by >= " + std::to_string(opt.epsilon) + " at d=" +
                           d0.str() + " target " + s.target.summary()});
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rep.covered += covered[i];
    rep.monotonicity_checks += static_cast<int>(catalog.size());
    for (auto& v : violations[i]) rep.violations.push_back(std::move(v));
  }
  return rep;
}

}  // namespace propsynth
