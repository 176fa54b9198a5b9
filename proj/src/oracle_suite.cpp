#include "propsynth/oracle_suite.hpp"

#include <sstream>

#include "propsynth/abstract.hpp"
#include "propsynth/distance.hpp"
#include "propsynth/rng.hpp"

namespace propsynth {

namespace {

// All 64 (y,z,w) triples: commutativity, associativity, identities,
// annihilator, distributivity.
void check_semiring(OracleSuiteReport& rep) {
  const Loc all[4] = {Loc::X, Loc::O, Loc::M, Loc::A};
  auto add = [](Loc a, Loc b) { return loc_add(a, b); };
  auto mul = [](Loc a, Loc b) { return loc_mul(a, b); };
  for (Loc y : all) {
    if (add(y, Loc::X) != y)
      rep.violations.push_back({"semiring", "additive identity fails for " + std::string(loc_glyph(y))});
    if (mul(y, Loc::O) != y || mul(Loc::O, y) != y)
      rep.violations.push_back({"semiring", "multiplicative identity fails"});
    if (mul(y, Loc::X) != Loc::X || mul(Loc::X, y) != Loc::X)
      rep.violations.push_back({"semiring", "annihilator fails"});
    for (Loc z : all) {
      if (add(y, z) != add(z, y)) rep.violations.push_back({"semiring", "+ not commutative"});
      if (mul(y, z) != mul(z, y)) rep.violations.push_back({"semiring", "* not commutative"});
      for (Loc w : all) {
        if (add(add(y, z), w) != add(y, add(z, w)))
          rep.violations.push_back({"semiring", "+ not associative"});
        if (mul(mul(y, z), w) != mul(y, mul(z, w)))
          rep.violations.push_back({"semiring", "* not associative"});
        if (mul(y, add(z, w)) != add(mul(y, z), mul(y, w)))
          rep.violations.push_back({"semiring", "left distributivity fails"});
        if (mul(add(z, w), y) != add(mul(z, y), mul(w, y)))
          rep.violations.push_back({"semiring", "right distributivity fails"});
      }
    }
  }
}

// Reference linearity classification, used to validate op_is_linear against
// the concrete test.
bool expected_linear(OpKind k) { return op_is_linear(k); }

MixingMatrix corrupted(const MixingMatrix& m) {
  MixingMatrix c = m;
  c.at(0, m.cols() - 1) = c.at(0, m.cols() - 1) == Loc::A ? Loc::X : Loc::A;
  return c;
}

}  // namespace

std::string OracleSuiteReport::render() const {
  std::ostringstream os;
  os << "oracle suite: " << ops_checked << " ops, " << chains_checked << " chains, "
     << covering_samples << " covering samples, " << violations.size() << " violations\n";
  for (const auto& v : violations) os << "  FAIL [" << v.check << "] " << v.detail << "\n";
  for (const auto& w : warnings) os << "  warn: " << w << "\n";
  return os.str();
}

OracleSuiteReport run_oracle_suite(const OracleSuiteOptions& opt) {
  OracleSuiteReport rep;
  check_semiring(rep);

  std::vector<PrimitiveOp> catalog;
  try {
    catalog = op_catalog(opt.catalog);
  } catch (const std::exception& e) {
    rep.warnings.push_back(std::string("catalog empty (") + e.what() + "): remaining checks are vacuous");
    return rep;
  }

  OracleOptions oracle_opt;
  oracle_opt.policy = opt.policy;

  // Per-op: abstract mixing must equal the oracle under center evaluation,
  // and the hand linearity table must agree with the concrete test.
  struct OpCase {
    std::size_t op;
    std::size_t shape;
  };
  std::vector<OpCase> cases;
  for (std::size_t i = 0; i < catalog.size(); ++i)
    for (std::size_t s = 0; s < opt.shapes.size(); ++s) cases.push_back({i, s});
  std::vector<std::vector<OracleSuiteReport::Violation>> found(cases.size());
  parallel_for(opt.policy, static_cast<std::int64_t>(cases.size()), [&](std::int64_t ci) {
    const auto& c = cases[static_cast<std::size_t>(ci)];
    const PrimitiveOp& op = catalog[c.op];
    const TensorShape& shape = opt.shapes[c.shape];
    if (op.arity() != 1) return;
    auto sem = op_abstract_semantics(op, shape);
    if (!sem) return;  // inapplicable at this shape
    MixingMatrix abstract = sem->mixing;
    if (!opt.corrupt_op_kind.empty() && op_kind_name(op.kind) == opt.corrupt_op_kind)
      abstract = corrupted(abstract);
    OracleOptions local = oracle_opt;
    local.policy = ExecPolicy::Serial;  // already parallel across cases
    const MixingMatrix oracle = concrete_mixing(op, shape, local);
    auto& sink = found[static_cast<std::size_t>(ci)];
    if (!(abstract == oracle))
      sink.push_back({"abstract-vs-oracle", op.display() + " at " + shape.str() + ": abstract " +
                                                abstract.letters() + " vs oracle " + oracle.letters()});
    if (linearity_test(op, shape) != expected_linear(op.kind))
      sink.push_back({"linearity", op.display() + " at " + shape.str() +
                                       ": table says " + (expected_linear(op.kind) ? "linear" : "nonlinear") +
                                       ", test disagrees"});
  });
  for (auto& f : found)
    for (auto& v : f) rep.violations.push_back(std::move(v));
  rep.ops_checked = static_cast<int>(catalog.size());

  // Random chains: composed abstract mixing must stay a lower bound of the
  // concrete oracle (receptive fields grow, so equality is not expected).
  Rng rng(opt.seed);
  struct ChainCase {
    std::vector<PrimitiveOp> ops;
    TensorShape shape;
  };
  std::vector<ChainCase> chains;
  int guard = 0;
  while (static_cast<int>(chains.size()) < opt.chain_samples && guard++ < opt.chain_samples * 30) {
    const TensorShape& shape = opt.shapes[rng.uniform_index(opt.shapes.size())];
    const int len = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(opt.max_chain_len)));
    PropertyState s = identity_state(shape);
    std::vector<PrimitiveOp> ops;
    for (int i = 0; i < len; ++i) {
      bool ok = false;
      for (int attempt = 0; attempt < 12 && !ok; ++attempt) {
        const auto& op = catalog[rng.uniform_index(catalog.size())];
        if (op.arity() != 1) continue;
        auto next = append_abstract(s, op);
        if (!next) continue;
        if (next->shape.elements() > 4096) continue;  // keep the oracle affordable
        s = *next;
        ops.push_back(op);
        ok = true;
      }
      if (!ok) break;
    }
    if (ops.empty()) continue;
    chains.push_back({std::move(ops), shape});
  }
  std::vector<std::vector<OracleSuiteReport::Violation>> chain_found(chains.size());
  parallel_for(opt.policy, static_cast<std::int64_t>(chains.size()), [&](std::int64_t ci) {
    const auto& c = chains[static_cast<std::size_t>(ci)];
    PropertyState s = identity_state(c.shape);
    for (const auto& op : c.ops) s = *append_abstract(s, op);
    OracleOptions local;
    local.policy = ExecPolicy::Serial;
    const MixingMatrix oracle = concrete_mixing_chain(c.ops, c.shape, local);
    if (!s.mixing.leq(oracle)) {
      std::string desc;
      for (const auto& op : c.ops) desc += op.display() + " ";
      chain_found[static_cast<std::size_t>(ci)].push_back(
          {"chain-soundness", desc + "at " + c.shape.str() + ": abstract " + s.mixing.letters() +
                                  " not <= oracle " + oracle.letters()});
    }
  });
  for (auto& f : chain_found)
    for (auto& v : f) rep.violations.push_back(std::move(v));
  rep.chains_checked = static_cast<int>(chains.size());

  CoveringCheckOptions cov;
  cov.samples = opt.covering_samples;
  cov.seed = splitmix64(opt.seed ^ 0xc0e31ULL);
  cov.policy = opt.policy;
  const CoveringReport cov_rep = covering_check(catalog, cov);
  rep.covering_samples = cov_rep.samples;
  for (const auto& v : cov_rep.violations) rep.violations.push_back({v.kind, v.detail});
  return rep;
}

}  // namespace propsynth
