#include "propsynth/oracle.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "propsynth/op_semantics.hpp"
#include "propsynth/rng.hpp"

namespace propsynth {

namespace {

DenseTensor random_base(const TensorShape& s, std::uint64_t seed) {
  // Positive generic inputs keep ReLU active and max-windows distinct.
  DenseTensor t(s);
  for (std::size_t i = 0; i < t.v.size(); ++i) {
    const std::uint64_t h = splitmix64(seed ^ (0xb0ba + i * 0x9e3779b97f4a7c15ULL));
    t.v[i] = 0.5 + std::ldexp(static_cast<double>(h >> 11), -53);
  }
  return t;
}

TensorFn op_fn(const PrimitiveOp& op, std::uint64_t weight_seed) {
  return [op, weight_seed](const DenseTensor& x) { return eval_op(op, x, WeightAssignment(weight_seed)); };
}

}  // namespace

ContributionPattern contribution_pattern_fn(const TensorFn& f, const TensorShape& in_shape,
                                            const OracleOptions& opt) {
  if (in_shape.elements() > opt.element_cap)
    throw std::invalid_argument("contribution_pattern: input exceeds element cap (" +
                                std::to_string(in_shape.elements()) + " > " +
                                std::to_string(opt.element_cap) + ")");
  const std::int64_t n_in = in_shape.elements();

  ContributionPattern pat;
  pat.in_shape = in_shape;
  bool first_trial = true;

  for (int trial = 0; trial < opt.trials; ++trial) {
    const std::uint64_t trial_seed = splitmix64(opt.seed + 7919u * static_cast<std::uint64_t>(trial));
    const DenseTensor base = random_base(in_shape, trial_seed);
    const DenseTensor y0 = f(base);
    if (y0.shape.elements() > opt.element_cap)
      throw std::invalid_argument("contribution_pattern: output exceeds element cap");
    const std::int64_t n_out = y0.shape.elements();
    if (first_trial) {
      pat.out_shape = y0.shape;
      pat.masks.assign(static_cast<std::size_t>(n_out),
                       std::vector<std::uint64_t>(static_cast<std::size_t>((n_in + 63) / 64), 0));
      first_trial = false;
    }

    // Two forward passes per perturbed input element (both directions, so a
    // saturated activation like a dead ReLU on one side still reveals the
    // dependence); columns are independent.
    std::vector<std::vector<std::uint64_t>> cols(static_cast<std::size_t>(n_in));
    parallel_for(opt.policy, n_in, [&](std::int64_t i) {
      auto& col = cols[static_cast<std::size_t>(i)];
      col.assign(static_cast<std::size_t>((n_out + 63) / 64), 0);
      for (const double bump : {opt.perturbation, -opt.perturbation}) {
        DenseTensor x = base;
        x.v[static_cast<std::size_t>(i)] += bump;
        const DenseTensor y1 = f(x);
        for (std::int64_t o = 0; o < n_out; ++o)
          if (std::fabs(y1.v[static_cast<std::size_t>(o)] - y0.v[static_cast<std::size_t>(o)]) >
              opt.threshold)
            col[static_cast<std::size_t>(o >> 6)] |= 1ULL << (o & 63);
      }
    });
    for (std::int64_t i = 0; i < n_in; ++i) {
      const auto& col = cols[static_cast<std::size_t>(i)];
      for (std::int64_t o = 0; o < n_out; ++o)
        if (col[static_cast<std::size_t>(o >> 6)] >> (o & 63) & 1)
          pat.masks[static_cast<std::size_t>(o)][static_cast<std::size_t>(i >> 6)] |= 1ULL << (i & 63);
    }
  }
  return pat;
}

ContributionPattern contribution_pattern(const PrimitiveOp& op, const TensorShape& in_shape,
                                         const OracleOptions& opt) {
  if (op.arity() != 1)
    throw std::invalid_argument("contribution_pattern: only single-input ops are supported");
  return contribution_pattern_fn(op_fn(op, splitmix64(opt.seed ^ 0xb17)), in_shape, opt);
}

MixingMatrix mixing_from_pattern(const ContributionPattern& p) {
  const int rank_in = p.in_shape.rank();
  const int rank_out = p.out_shape.rank();
  const std::int64_t n_in = p.in_shape.elements();

  DenseTensor in_index_helper(p.in_shape);   // for unflat only
  DenseTensor out_index_helper(p.out_shape);

  std::vector<std::int64_t> center_out(static_cast<std::size_t>(rank_out));
  for (int d = 0; d < rank_out; ++d)
    center_out[static_cast<std::size_t>(d)] = p.out_shape.dims[static_cast<std::size_t>(d)] / 2;

  // Distinct positions along each input dim covered by a set of output elements.
  auto coverage = [&](const std::vector<std::int64_t>& out_elems) {
    std::vector<std::set<std::int64_t>> cov(static_cast<std::size_t>(rank_in));
    for (std::int64_t oe : out_elems) {
      const auto& mask = p.masks[static_cast<std::size_t>(oe)];
      for (std::int64_t i = 0; i < n_in; ++i) {
        if (!(mask[static_cast<std::size_t>(i >> 6)] >> (i & 63) & 1)) continue;
        const auto idx = in_index_helper.unflat(i);
        for (int d = 0; d < rank_in; ++d) cov[static_cast<std::size_t>(d)].insert(idx[static_cast<std::size_t>(d)]);
      }
    }
    return cov;
  };

  // Locality per input dim from the center output element.
  const std::int64_t center_flat = out_index_helper.flat(center_out);
  const auto center_cov = coverage({center_flat});
  std::vector<Loc> locality(static_cast<std::size_t>(rank_in));
  for (int d = 0; d < rank_in; ++d)
    locality[static_cast<std::size_t>(d)] =
        loc_of_coverage(static_cast<std::int64_t>(center_cov[static_cast<std::size_t>(d)].size()),
                        p.in_shape.dims[static_cast<std::size_t>(d)]);

  MixingMatrix m(rank_out, rank_in);
  for (int k = 0; k < rank_out; ++k) {
    // Center slice along output dim k.
    std::vector<std::int64_t> slice;
    std::vector<std::int64_t> idx = center_out;
    for (std::int64_t v = 0; v < p.out_shape.dims[static_cast<std::size_t>(k)]; ++v) {
      idx[static_cast<std::size_t>(k)] = v;
      slice.push_back(out_index_helper.flat(idx));
    }
    const auto cov = coverage(slice);
    for (int l = 0; l < rank_in; ++l) {
      const std::int64_t extent = p.in_shape.dims[static_cast<std::size_t>(l)];
      bool paired = static_cast<std::int64_t>(cov[static_cast<std::size_t>(l)].size()) == extent;
      // Size-1 input dims pair only diagonally (same convention as the
      // abstract tables).
      if (extent == 1 && k != l) paired = false;
      m.at(k, l) = paired ? locality[static_cast<std::size_t>(l)] : Loc::X;
    }
  }
  return m;
}

ContributionPattern identity_pattern(const TensorShape& shape) {
  ContributionPattern p;
  p.in_shape = shape;
  p.out_shape = shape;
  const std::int64_t n = shape.elements();
  p.masks.assign(static_cast<std::size_t>(n),
                 std::vector<std::uint64_t>(static_cast<std::size_t>((n + 63) / 64), 0));
  for (std::int64_t i = 0; i < n; ++i)
    p.masks[static_cast<std::size_t>(i)][static_cast<std::size_t>(i >> 6)] |= 1ULL << (i & 63);
  return p;
}

ContributionPattern compose_patterns(const ContributionPattern& second,
                                     const ContributionPattern& first) {
  if (!(second.in_shape == first.out_shape))
    throw std::invalid_argument("compose_patterns: inner shapes disagree");
  ContributionPattern out;
  out.in_shape = first.in_shape;
  out.out_shape = second.out_shape;
  const std::int64_t n_out = second.out_shape.elements();
  const std::int64_t n_mid = first.out_shape.elements();
  const std::size_t words = first.masks.empty() ? 0 : first.masks[0].size();
  out.masks.assign(static_cast<std::size_t>(n_out), std::vector<std::uint64_t>(words, 0));
  for (std::int64_t o = 0; o < n_out; ++o) {
    auto& row = out.masks[static_cast<std::size_t>(o)];
    for (std::int64_t m = 0; m < n_mid; ++m) {
      if (!second.contributes(o, m)) continue;
      const auto& mid = first.masks[static_cast<std::size_t>(m)];
      for (std::size_t w = 0; w < words; ++w) row[w] |= mid[w];
    }
  }
  return out;
}

ContributionPattern union_patterns(const ContributionPattern& a, const ContributionPattern& b) {
  if (!(a.in_shape == b.in_shape) || !(a.out_shape == b.out_shape))
    throw std::invalid_argument("union_patterns: shapes disagree");
  ContributionPattern out = a;
  for (std::size_t o = 0; o < out.masks.size(); ++o)
    for (std::size_t w = 0; w < out.masks[o].size(); ++w) out.masks[o][w] |= b.masks[o][w];
  return out;
}

MixingMatrix concrete_mixing(const PrimitiveOp& op, const TensorShape& in_shape,
                             const OracleOptions& opt) {
  return mixing_from_pattern(contribution_pattern(op, in_shape, opt));
}

MixingMatrix concrete_mixing_chain(const std::vector<PrimitiveOp>& ops, const TensorShape& in_shape,
                                   const OracleOptions& opt) {
  // Per-op dependence is measured by differencing; the chain pattern is the
  // relational composition (differencing a whole deep chain at one point can
  // miss dependences behind saturated activations).
  ContributionPattern acc = identity_pattern(in_shape);
  TensorShape shape = in_shape;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    OracleOptions per_op = opt;
    per_op.seed = splitmix64(opt.seed + 0x9e37 * (i + 1));
    acc = compose_patterns(contribution_pattern(ops[i], shape, per_op), acc);
    shape = acc.out_shape;
  }
  return mixing_from_pattern(acc);
}

bool linearity_test(const PrimitiveOp& op, const TensorShape& in_shape, int trials, double rel_tol,
                    std::uint64_t seed) {
  const WeightAssignment w(splitmix64(seed ^ 0x77));
  Rng rng(splitmix64(seed));
  auto apply = [&](const DenseTensor& t) {
    if (op.arity() == 2) return eval_op(op, {t, t}, w);  // f(x) = add(x, x)
    return eval_op(op, t, w);
  };
  for (int t = 0; t < trials; ++t) {
    const double a = (rng.coin(0.5) ? 1 : -1) * rng.uniform(0.25, 2.0);
    const double b = (rng.coin(0.5) ? 1 : -1) * rng.uniform(0.25, 2.0);
    DenseTensor x(in_shape), y(in_shape);
    for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : y.v) v = rng.uniform(-1.0, 1.0);
    const DenseTensor fx = apply(x);
    const DenseTensor fy = apply(y);
    DenseTensor z(in_shape);
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] = a * x.v[i] + b * y.v[i];
    const DenseTensor fz = apply(z);
    for (std::size_t i = 0; i < fz.v.size(); ++i) {
      const double lhs = a * fx.v[i] + b * fy.v[i];
      const double rhs = fz.v[i];
      const double tol = rel_tol * std::max({1.0, std::fabs(lhs), std::fabs(rhs)});
      if (std::fabs(lhs - rhs) > tol) return false;
    }
  }
  return true;
}

}  // namespace propsynth
