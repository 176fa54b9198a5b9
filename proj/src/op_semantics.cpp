#include "propsynth/op_semantics.hpp"

namespace propsynth {

namespace {

bool divisible_spatial(const TensorShape& s, std::int64_t w) {
  for (int i = 0; i < s.spatial_rank(); ++i)
    if (s.spatial(i) % w != 0) return false;
  return true;
}

}  // namespace

std::vector<std::pair<std::int64_t, std::int64_t>> window_taps(std::int64_t extent,
                                                               std::int64_t out_pos, std::int64_t k,
                                                               std::int64_t stride,
                                                               std::int64_t dilation) {
  std::vector<std::pair<std::int64_t, std::int64_t>> taps;
  taps.reserve(static_cast<std::size_t>(k));
  const std::int64_t pad_low = stride == 1 ? (k - 1) * dilation / 2 : 0;
  for (std::int64_t j = 0; j < k; ++j) {
    const std::int64_t p = stride == 1 ? out_pos - pad_low + j * dilation : out_pos * stride + j;
    if (p >= 0 && p < extent) taps.push_back({j, p});
  }
  return taps;
}

std::vector<std::int64_t> window_positions(std::int64_t extent, std::int64_t out_pos,
                                           std::int64_t k, std::int64_t stride,
                                           std::int64_t dilation) {
  std::vector<std::int64_t> pos;
  for (auto [j, p] : window_taps(extent, out_pos, k, stride, dilation)) pos.push_back(p);
  return pos;
}

bool op_is_linear(OpKind kind) {
  switch (kind) {
    case OpKind::Dense:
    case OpKind::Convolution:
    case OpKind::GroupedConvolution:
    case OpKind::DilatedConvolution:
    case OpKind::Add:
    case OpKind::ScalarMultiply:
    case OpKind::BatchNorm:
    case OpKind::LayerNorm:
    case OpKind::GroupNorm:
    case OpKind::Dropout:
    case OpKind::AveragePool:
      return true;
    case OpKind::ReLU:
    case OpKind::GeLU:
    case OpKind::SiLU:
    case OpKind::Sigmoid:
    case OpKind::Softmax:
    case OpKind::MaxPool:
      return false;
  }
  return false;
}

std::optional<TensorShape> op_output_shape(const PrimitiveOp& op,
                                           const std::vector<TensorShape>& inputs) {
  if (static_cast<int>(inputs.size()) != op.arity()) return std::nullopt;
  if (!op_params_valid(op)) return std::nullopt;
  for (const auto& s : inputs)
    if (!s.valid()) return std::nullopt;
  const TensorShape& in = inputs[0];

  switch (op.kind) {
    case OpKind::Dense: {
      TensorShape out = in;
      out.dims.back() = op.features();
      return out;
    }
    case OpKind::Convolution:
    case OpKind::GroupedConvolution:
    case OpKind::DilatedConvolution: {
      if (in.spatial_rank() < 1) return std::nullopt;
      if (op.kind == OpKind::DilatedConvolution) {
        // Extents below the dilation leave some output positions with every
        // tap out of bounds, i.e. an identically-zero op.
        for (int i = 0; i < in.spatial_rank(); ++i)
          if (in.spatial(i) < op.dilation()) return std::nullopt;
      }
      if (op.kind == OpKind::GroupedConvolution) {
        if (in.channels() % op.groups() != 0 || op.features() % op.groups() != 0)
          return std::nullopt;
        // A single input channel per group may only map to a single output
        // channel: one-to-one channel locality with fan-out would break the
        // composition rule for the mixing property.
        if (in.channels() / op.groups() == 1 && op.features() / op.groups() > 1)
          return std::nullopt;
      }
      TensorShape out = in;
      if (op.stride() > 1) {
        if (!divisible_spatial(in, op.stride())) return std::nullopt;
        for (int i = 0; i < out.spatial_rank(); ++i) out.spatial(i) /= op.stride();
      }
      out.dims.back() = op.features();
      return out;
    }
    case OpKind::Add:
      if (inputs[0] != inputs[1]) return std::nullopt;
      return in;
    case OpKind::ScalarMultiply:
    case OpKind::ReLU:
    case OpKind::GeLU:
    case OpKind::SiLU:
    case OpKind::Sigmoid:
    case OpKind::BatchNorm:
    case OpKind::Dropout:
      return in;
    case OpKind::Softmax:
    case OpKind::LayerNorm:
      if (in.channels() < 2) return std::nullopt;
      return in;
    case OpKind::GroupNorm: {
      if (in.channels() % op.groups() != 0) return std::nullopt;
      if (in.channels() / op.groups() < 2) return std::nullopt;
      return in;
    }
    case OpKind::AveragePool:
    case OpKind::MaxPool: {
      if (in.spatial_rank() < 1) return std::nullopt;
      if (!divisible_spatial(in, op.window())) return std::nullopt;
      TensorShape out = in;
      for (int i = 0; i < out.spatial_rank(); ++i) out.spatial(i) /= op.window();
      return out;
    }
  }
  return std::nullopt;
}

}  // namespace propsynth
