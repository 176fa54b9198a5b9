#pragma once

#include <cstdint>
#include <vector>

#include "propsynth/shape.hpp"

namespace propsynth {

// Row-major dense tensor of doubles; just enough for the reference
// interpreter and the gradient oracles.
struct DenseTensor {
  TensorShape shape;
  std::vector<double> v;

  DenseTensor() = default;
  explicit DenseTensor(const TensorShape& s) : shape(s), v(static_cast<std::size_t>(s.elements()), 0.0) {}

  double& at(const std::vector<std::int64_t>& idx) { return v[static_cast<std::size_t>(flat(idx))]; }
  double at(const std::vector<std::int64_t>& idx) const { return v[static_cast<std::size_t>(flat(idx))]; }

  std::int64_t flat(const std::vector<std::int64_t>& idx) const {
    std::int64_t f = 0;
    for (std::size_t d = 0; d < shape.dims.size(); ++d) f = f * shape.dims[d] + idx[d];
    return f;
  }

  std::vector<std::int64_t> unflat(std::int64_t f) const {
    std::vector<std::int64_t> idx(shape.dims.size());
    for (std::size_t d = shape.dims.size(); d-- > 0;) {
      idx[d] = f % shape.dims[d];
      f /= shape.dims[d];
    }
    return idx;
  }
};

// Odometer over all index tuples of a shape.
template <class F>
void for_each_index(const TensorShape& s, F&& body) {
  std::vector<std::int64_t> idx(s.dims.size(), 0);
  const std::int64_t n = s.elements();
  for (std::int64_t i = 0; i < n; ++i) {
    body(idx);
    for (std::size_t d = s.dims.size(); d-- > 0;) {
      if (++idx[d] < s.dims[d]) break;
      idx[d] = 0;
    }
  }
}

}  // namespace propsynth
