#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "propsynth/eval.hpp"
#include "propsynth/mixing.hpp"
#include "propsynth/ops.hpp"
#include "propsynth/parallel.hpp"
#include "propsynth/tensor.hpp"

namespace propsynth {

// Which input elements an output element depends on, at a fixed shape.
struct ContributionPattern {
  TensorShape in_shape;
  TensorShape out_shape;
  std::vector<std::vector<std::uint64_t>> masks;  // [out element][bit words over input elements]

  bool contributes(std::int64_t out_elem, std::int64_t in_elem) const {
    return masks[static_cast<std::size_t>(out_elem)][static_cast<std::size_t>(in_elem >> 6)] >>
               (in_elem & 63) &
           1;
  }
};

struct OracleOptions {
  int trials = 3;                    // independent weight/base draws, masks OR-ed
  double threshold = 1e-12;          // absolute forward-difference threshold
  double perturbation = 3.0;         // large bump so argmax-style ops expose every window element
  std::int64_t element_cap = 4096;   // refuse shapes beyond this
  std::uint64_t seed = 0x0facadeULL;
  ExecPolicy policy = ExecPolicy::Serial;
};

using TensorFn = std::function<DenseTensor(const DenseTensor&)>;

// Brute-force dependence detection by randomized two-sided forward
// differencing. Throws std::invalid_argument when the shape exceeds the
// element cap.
ContributionPattern contribution_pattern_fn(const TensorFn& f, const TensorShape& in_shape,
                                            const OracleOptions& opt = {});
ContributionPattern contribution_pattern(const PrimitiveOp& op, const TensorShape& in_shape,
                                         const OracleOptions& opt = {});

// Relational algebra on dependence patterns. Generic-position dependence
// composes relationally: an output element depends on an input element when
// some intermediate element links them (for generic weights the chain-rule
// sum has no identical cancellation).
ContributionPattern identity_pattern(const TensorShape& shape);
ContributionPattern compose_patterns(const ContributionPattern& second,
                                     const ContributionPattern& first);
ContributionPattern union_patterns(const ContributionPattern& a, const ContributionPattern& b);

// Mixing matrix from a contribution pattern under the center-evaluation
// convention: locality from the center output element, pairing from the
// center output slice per dimension.
MixingMatrix mixing_from_pattern(const ContributionPattern& p);

MixingMatrix concrete_mixing(const PrimitiveOp& op, const TensorShape& in_shape,
                             const OracleOptions& opt = {});
MixingMatrix concrete_mixing_chain(const std::vector<PrimitiveOp>& ops, const TensorShape& in_shape,
                                   const OracleOptions& opt = {});

// Checks a*f(x) + b*f(y) == f(a*x + b*y) over `trials` random draws.
bool linearity_test(const PrimitiveOp& op, const TensorShape& in_shape, int trials = 8,
                    double rel_tol = 1e-9, std::uint64_t seed = 0x11bea7ULL);

}  // namespace propsynth
