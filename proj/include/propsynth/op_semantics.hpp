#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "propsynth/ops.hpp"
#include "propsynth/shape.hpp"

namespace propsynth {

// Shape rule shared by validation, evaluation and abstract interpretation.
// Returns nullopt when the op cannot be applied at the given input shapes:
//  - conv/pool need at least one spatial dim; strided/pooled dims must divide;
//  - GroupedConvolution needs in/out channels divisible by groups;
//  - Softmax/LayerNorm need >= 2 channels, GroupNorm >= 2 channels per group
//    (a single-element normalization slice is identically zero);
//  - Add needs two equal shapes.
std::optional<TensorShape> op_output_shape(const PrimitiveOp& op,
                                           const std::vector<TensorShape>& inputs);

inline std::optional<TensorShape> op_output_shape(const PrimitiveOp& op, const TensorShape& in) {
  return op_output_shape(op, std::vector<TensorShape>{in});
}

// Whether the op counts as linear for the depth property. Norms and Dropout
// evaluate in inference mode (see eval.cpp) and are genuinely linear there;
// MaxPool is the one pooling op that is not.
bool op_is_linear(OpKind kind);

// Kernel taps read along one spatial dimension by output index `out_pos`, as
// (tap index, input position) pairs, for a square window of size k with the
// given stride and dilation. Stride 1 uses zero "same" padding (floor-left);
// stride == k partitions the dim into non-overlapping windows. Out-of-range
// taps are dropped.
std::vector<std::pair<std::int64_t, std::int64_t>> window_taps(std::int64_t extent,
                                                               std::int64_t out_pos, std::int64_t k,
                                                               std::int64_t stride,
                                                               std::int64_t dilation);

std::vector<std::int64_t> window_positions(std::int64_t extent, std::int64_t out_pos,
                                           std::int64_t k, std::int64_t stride,
                                           std::int64_t dilation);

}  // namespace propsynth
