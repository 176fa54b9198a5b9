#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "propsynth/shape.hpp"

namespace propsynth {

enum class OpKind : std::uint8_t {
  Dense,
  Convolution,
  GroupedConvolution,
  DilatedConvolution,
  Add,
  ScalarMultiply,
  ReLU,
  GeLU,
  SiLU,
  Sigmoid,
  Softmax,
  BatchNorm,
  LayerNorm,
  GroupNorm,
  Dropout,
  AveragePool,
  MaxPool,
};

const char* op_kind_name(OpKind k);
std::optional<OpKind> op_kind_from_name(const std::string& name);

struct PrimitiveOp {
  OpKind kind = OpKind::ReLU;
  // Kind-specific parameters, all numeric: features, kernel, stride, groups,
  // dilation, window, value, rate, momentum. An ordered map keeps the
  // serialized form stable.
  std::map<std::string, double> params;

  int arity() const { return kind == OpKind::Add ? 2 : 1; }

  double param(const std::string& name, double fallback = 0.0) const {
    auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  }
  std::int64_t iparam(const std::string& name, std::int64_t fallback = 0) const {
    return static_cast<std::int64_t>(param(name, static_cast<double>(fallback)));
  }

  std::int64_t features() const { return iparam("features"); }
  std::int64_t kernel() const { return iparam("kernel"); }
  std::int64_t stride() const { return iparam("stride", 1); }
  std::int64_t groups() const { return iparam("groups", 1); }
  std::int64_t dilation() const { return iparam("dilation", 1); }
  std::int64_t window() const { return iparam("window"); }

  std::string display() const;

  bool operator==(const PrimitiveOp& o) const { return kind == o.kind && params == o.params; }
  bool operator!=(const PrimitiveOp& o) const { return !(*this == o); }
};

// Checks the per-kind parameter constraints (square kernels are implicit in the
// single kernel/window parameter; strides must be 1 or equal to the kernel).
bool op_params_valid(const PrimitiveOp& op, std::string* why = nullptr);

// Convenience constructors.
PrimitiveOp make_dense(std::int64_t features);
PrimitiveOp make_conv(std::int64_t features, std::int64_t kernel, std::int64_t stride = 1);
PrimitiveOp make_grouped_conv(std::int64_t features, std::int64_t kernel, std::int64_t groups,
                              std::int64_t stride = 1);
PrimitiveOp make_dilated_conv(std::int64_t features, std::int64_t kernel, std::int64_t dilation);
PrimitiveOp make_add();
PrimitiveOp make_scalar_multiply(double value);
PrimitiveOp make_activation(OpKind kind);  // ReLU/GeLU/SiLU/Sigmoid/Softmax
PrimitiveOp make_batch_norm(double momentum = 0.9);
PrimitiveOp make_layer_norm();
PrimitiveOp make_group_norm(std::int64_t groups);
PrimitiveOp make_dropout(double rate);
PrimitiveOp make_pool(OpKind kind, std::int64_t window);  // AveragePool/MaxPool

struct CatalogConfig {
  std::vector<std::int64_t> kernels{1, 2, 3, 5};
  std::vector<std::int64_t> pool_windows{2, 3};
  // Feature sizes relative to the reference channel count, as num/den ratios.
  std::vector<std::pair<std::int64_t, std::int64_t>> feature_ratios{{1, 2}, {1, 1}, {2, 1}, {4, 1}};
  std::vector<std::int64_t> features_absolute{};
  std::vector<std::int64_t> group_counts{2, 4};
  std::vector<std::int64_t> dilations{2};
  std::vector<double> scalar_values{0.5, 2.0};
  std::vector<double> dropout_rates{0.1, 0.2};
  std::vector<double> batchnorm_momentums{0.9, 0.99};
  std::int64_t reference_channels = 8;

  bool with_dense = true;
  bool with_convolution = true;
  bool with_grouped = true;
  bool with_dilated = true;
  bool with_scalar_multiply = true;
  bool with_activations = true;
  bool with_softmax = true;
  bool with_norms = true;
  bool with_dropout = true;
  bool with_pooling = true;
};

// Deterministic enumeration of the concrete single-input ops used for
// synthesis. Throws std::invalid_argument when an enabled family has an empty
// parameter grid or the result would be empty.
std::vector<PrimitiveOp> op_catalog(const CatalogConfig& config);

}  // namespace propsynth
