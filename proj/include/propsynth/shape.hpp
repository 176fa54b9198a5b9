#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace propsynth {

// Tensor shape, batch-first and channel-last with spatial dims in between.
struct TensorShape {
  std::vector<std::int64_t> dims;

  TensorShape() = default;
  TensorShape(std::initializer_list<std::int64_t> d) : dims(d) {}
  explicit TensorShape(std::vector<std::int64_t> d) : dims(std::move(d)) {}

  int rank() const { return static_cast<int>(dims.size()); }
  int spatial_rank() const { return rank() - 2; }
  std::int64_t batch() const { return dims.front(); }
  std::int64_t channels() const { return dims.back(); }
  std::int64_t spatial(int i) const { return dims[static_cast<std::size_t>(i) + 1]; }
  std::int64_t& spatial(int i) { return dims[static_cast<std::size_t>(i) + 1]; }

  bool valid() const {
    if (rank() < 2) return false;
    for (auto d : dims)
      if (d < 1) return false;
    return true;
  }

  std::int64_t elements() const {
    std::int64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  bool operator==(const TensorShape& o) const { return dims == o.dims; }
  bool operator!=(const TensorShape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims[i]);
    }
    return s + ")";
  }
};

}  // namespace propsynth
