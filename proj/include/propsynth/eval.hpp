#pragma once

#include <cstdint>
#include <vector>

#include "propsynth/ops.hpp"
#include "propsynth/rng.hpp"
#include "propsynth/tensor.hpp"

namespace propsynth {

// Deterministically seeded weights. Bias terms evaluate as zero and norms run
// in inference mode (scale only, per-example mean for Layer/GroupNorm), so
// every op classified linear is linear in the strict af(x)+bf(y)=f(ax+by)
// sense.
class WeightAssignment {
 public:
  explicit WeightAssignment(std::uint64_t seed) : seed_(seed) {}

  // Nonzero signed weight in +-[0.35, 1.0).
  double weight(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0, std::uint64_t d = 0) const {
    const std::uint64_t h = mix(a, b, c, d);
    const double u = std::ldexp(static_cast<double>(h >> 11), -53);
    const double mag = 0.35 + 0.65 * u;
    return (h & 1) ? mag : -mag;
  }

  // Positive scale in [0.5, 1.5) for normalization layers.
  double scale(std::uint64_t c) const {
    const std::uint64_t h = mix(0x5ca1eULL, c, 0, 0);
    return 0.5 + std::ldexp(static_cast<double>(h >> 11), -53);
  }

  std::uint64_t seed() const { return seed_; }

  // Zeroes every convolution tap except the spatial center and indexes the
  // surviving weights like a dense layer, so a 3x3 convolution reduces to the
  // dense projection with the same weights.
  WeightAssignment with_center_tap_only() const {
    WeightAssignment w = *this;
    w.center_tap_only_ = true;
    return w;
  }
  bool center_tap_only() const { return center_tap_only_; }

 private:
  bool center_tap_only_ = false;
  std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) const {
    std::uint64_t h = seed_;
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    h = splitmix64(h ^ d);
    return h;
  }
  std::uint64_t seed_;
};

// Concrete reference interpreter for a single op. Throws std::invalid_argument
// when the shapes are incompatible with the op.
DenseTensor eval_op(const PrimitiveOp& op, const std::vector<DenseTensor>& inputs,
                    const WeightAssignment& weights);

inline DenseTensor eval_op(const PrimitiveOp& op, const DenseTensor& input,
                           const WeightAssignment& weights) {
  return eval_op(op, std::vector<DenseTensor>{input}, weights);
}

// Runs a sequential chain; op i uses WeightAssignment(seed ^ hash(i)).
DenseTensor eval_chain(const std::vector<PrimitiveOp>& ops, const DenseTensor& input,
                       std::uint64_t seed);

}  // namespace propsynth
