#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "propsynth/abstract.hpp"
#include "propsynth/mixing.hpp"
#include "propsynth/ops.hpp"
#include "propsynth/parallel.hpp"
#include "propsynth/rng.hpp"
#include "propsynth/shape.hpp"

namespace propsynth {

// Nonnegative integer distance with an explicit infinity (infeasibility).
struct Distance {
  bool inf = false;
  std::int64_t value = 0;

  static Distance infinite() { return {true, 0}; }
  static Distance finite(std::int64_t v) { return {false, v}; }

  bool zero() const { return !inf && value == 0; }
  Distance operator+(const Distance& o) const {
    if (inf || o.inf) return infinite();
    return finite(value + o.value);
  }
  bool operator==(const Distance& o) const { return inf == o.inf && (inf || value == o.value); }
  bool operator<(const Distance& o) const {
    if (inf) return false;
    if (o.inf) return true;
    return value < o.value;
  }
  bool operator<=(const Distance& o) const { return *this < o || *this == o; }
  std::string str() const { return inf ? "inf" : std::to_string(value); }
};

// Number of entries where the target exceeds the state; infinite when the
// dimensions differ. Reachability cuts (the infinity leg of the distance
// axioms) are handled by feasible_mixing at the task level.
Distance d_mixing(const MixingMatrix& u, const MixingMatrix& v);

Distance d_depth(int u, int v);

// Channel indicator plus the sum of (spatial ratio - 1) when every target
// extent divides the current one and all spatial ratios agree; infinite
// otherwise (square windows cannot realize unequal ratios, nothing upsamples).
Distance d_shape(const TensorShape& a, const TensorShape& b);

// Shapes reachable from `shape` under the catalog: spatial extents divided by
// products of the catalog's windows/strides, channels set to any of its
// feature counts. Bounded probe set shared by feasibility and compression.
std::vector<TensorShape> reachable_probe_shapes(const std::vector<PrimitiveOp>& catalog,
                                                const TensorShape& shape);

// Least fixpoint of U -> loc_add(U, mixing(e) x U) over the catalog ops
// applicable at `shape`; bounds every mixing value reachable from u0 along
// shape-preserving trajectories.
MixingMatrix mixing_closure(const MixingMatrix& u0, const std::vector<PrimitiveOp>& catalog,
                            const TensorShape& shape);

// Same fixpoint taken over every reachable probe shape, so locality gains
// from downsampled extents (a wide kernel on a pooled image) are included.
MixingMatrix mixing_closure_reachable(const MixingMatrix& u0,
                                      const std::vector<PrimitiveOp>& catalog,
                                      const TensorShape& shape);

bool feasible_mixing(const MixingMatrix& u0, const MixingMatrix& v,
                     const std::vector<PrimitiveOp>& catalog, const TensorShape& shape);

// When a target drops the shape requirement, the distance no longer rewards
// the downsampling steps that make wide-kernel localities reachable; this
// relaxes the mixing target to the fixed-shape closure so the covering
// argument applies. Targets with a shape component pass through unchanged.
TargetSpec relax_target_for_missing_shape(TargetSpec target,
                                          const std::vector<PrimitiveOp>& catalog,
                                          const TensorShape& input_shape);

// Catalog-relative shape reachability: the spatial ratio must decompose into
// the catalog's window/stride factors and the target channel count must be
// producible (or already equal).
bool feasible_shape(const TensorShape& from, const TensorShape& to,
                    const std::vector<PrimitiveOp>& catalog);

// Total distance of a state to a target, with the mixing feasibility closure
// precomputed once per task.
class DistanceEvaluator {
 public:
  DistanceEvaluator(TargetSpec target, const std::vector<PrimitiveOp>& catalog,
                    const TensorShape& initial_shape);

  Distance mixing_component(const PropertyState& s) const;
  Distance depth_component(const PropertyState& s) const;
  Distance shape_component(const PropertyState& s) const;
  Distance total(const PropertyState& s) const;

  const TargetSpec& target() const { return target_; }

 private:
  TargetSpec target_;
  bool mixing_feasible_ = true;
  bool shape_feasible_ = true;
};

// One-off convenience; builds the evaluator internally.
Distance d_total(const PropertyState& s, const TargetSpec& target,
                 const std::vector<PrimitiveOp>& catalog, const TensorShape& initial_shape);

struct CoveringViolation {
  std::string kind;  // "covering" or "monotonicity"
  std::string detail;
};

struct CoveringReport {
  int samples = 0;
  int covered = 0;
  int monotonicity_checks = 0;
  std::vector<CoveringViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string render() const;
};

struct CoveringCheckOptions {
  int samples = 200;
  int max_chain_len = 6;
  std::int64_t epsilon = 1;
  std::uint64_t seed = 0xc0ffee;
  ExecPolicy policy = ExecPolicy::Serial;
  std::vector<TensorShape> shapes{{2, 8, 8, 4}, {1, 6, 6, 8}, {2, 4, 4, 2}};
};

// Samples (state, target) pairs whose targets are inferred from random
// sequential chains, then checks that (a) some catalog op reduces the total
// distance by >= epsilon and (b) no op increases the mixing or depth distance.
CoveringReport covering_check(const std::vector<PrimitiveOp>& catalog,
                              const CoveringCheckOptions& opt = {});

// Turns a weak uniform covering bound into a uniform one:
// d'(x) = 0 if d(x) = 0, else d(x) + epsilon. Works on real-valued distances
// with std::numeric_limits infinity for infeasibility.
template <class F>
auto strengthen_distance(F d, double epsilon) {
  return [d = std::move(d), epsilon](auto&&... args) -> double {
    const double x = d(std::forward<decltype(args)>(args)...);
    if (x == 0.0 || std::isinf(x)) return x;
    return x + epsilon;
  };
}

}  // namespace propsynth
