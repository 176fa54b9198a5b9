#include "propsynth/ops.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace propsynth {

namespace {

struct KindName {
  OpKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {OpKind::Dense, "Dense"},
    {OpKind::Convolution, "Convolution"},
    {OpKind::GroupedConvolution, "GroupedConvolution"},
    {OpKind::DilatedConvolution, "DilatedConvolution"},
    {OpKind::Add, "Add"},
    {OpKind::ScalarMultiply, "ScalarMultiply"},
    {OpKind::ReLU, "ReLU"},
    {OpKind::GeLU, "GeLU"},
    {OpKind::SiLU, "SiLU"},
    {OpKind::Sigmoid, "Sigmoid"},
    {OpKind::Softmax, "Softmax"},
    {OpKind::BatchNorm, "BatchNorm"},
    {OpKind::LayerNorm, "LayerNorm"},
    {OpKind::GroupNorm, "GroupNorm"},
    {OpKind::Dropout, "Dropout"},
    {OpKind::AveragePool, "AveragePool"},
    {OpKind::MaxPool, "MaxPool"},
};

bool fail(std::string* why, const std::string& msg) {
  if (why) *why = msg;
  return false;
}

}  // namespace

const char* op_kind_name(OpKind k) {
  for (const auto& kn : kKindNames)
    if (kn.kind == k) return kn.name;
  return "?";
}

std::optional<OpKind> op_kind_from_name(const std::string& name) {
  for (const auto& kn : kKindNames)
    if (name == kn.name) return kn.kind;
  return std::nullopt;
}

std::string PrimitiveOp::display() const {
  std::ostringstream os;
  os << op_kind_name(kind);
  if (!params.empty()) {
    os << "(";
    bool first = true;
    for (const auto& [k, v] : params) {
      if (!first) os << ",";
      first = false;
      os << k << "=";
      if (v == static_cast<std::int64_t>(v))
        os << static_cast<std::int64_t>(v);
      else
        os << v;
    }
    os << ")";
  }
  return os.str();
}

bool op_params_valid(const PrimitiveOp& op, std::string* why) {
  const auto expect_keys = [&](std::initializer_list<const char*> keys) {
    std::set<std::string> want(keys.begin(), keys.end());
    for (const auto& [k, _] : op.params)
      if (!want.count(k)) return fail(why, std::string("unexpected parameter '") + k + "'");
    return true;
  };
  switch (op.kind) {
    case OpKind::Dense:
      if (!expect_keys({"features"})) return false;
      if (op.features() < 1) return fail(why, "Dense needs features >= 1");
      return true;
    case OpKind::Convolution:
    case OpKind::GroupedConvolution:
    case OpKind::DilatedConvolution: {
      const bool grouped = op.kind == OpKind::GroupedConvolution;
      const bool dilated = op.kind == OpKind::DilatedConvolution;
      if (grouped && !expect_keys({"features", "kernel", "stride", "groups"})) return false;
      if (dilated && !expect_keys({"features", "kernel", "stride", "dilation"})) return false;
      if (!grouped && !dilated && !expect_keys({"features", "kernel", "stride"})) return false;
      if (op.features() < 1) return fail(why, "convolution needs features >= 1");
      if (op.kernel() < 1) return fail(why, "convolution needs kernel >= 1");
      if (op.stride() != 1 && op.stride() != op.kernel())
        return fail(why, "stride must be 1 or equal to kernel");
      if (grouped && op.groups() < 2) return fail(why, "grouped convolution needs groups > 1");
      if (dilated && op.dilation() < 2) return fail(why, "dilated convolution needs dilation > 1");
      if (dilated && op.stride() != 1) return fail(why, "dilated convolution supports stride 1 only");
      return true;
    }
    case OpKind::Add:
      return expect_keys({});
    case OpKind::ScalarMultiply:
      if (!expect_keys({"value"})) return false;
      if (op.param("value") == 0.0) return fail(why, "ScalarMultiply needs a nonzero value");
      return true;
    case OpKind::ReLU:
    case OpKind::GeLU:
    case OpKind::SiLU:
    case OpKind::Sigmoid:
    case OpKind::Softmax:
    case OpKind::LayerNorm:
      return expect_keys({});
    case OpKind::BatchNorm:
      if (!expect_keys({"momentum"})) return false;
      if (op.param("momentum", 0.9) <= 0.0 || op.param("momentum", 0.9) >= 1.0)
        return fail(why, "BatchNorm momentum must be in (0,1)");
      return true;
    case OpKind::GroupNorm:
      if (!expect_keys({"groups"})) return false;
      if (op.groups() < 1) return fail(why, "GroupNorm needs groups >= 1");
      return true;
    case OpKind::Dropout:
      if (!expect_keys({"rate"})) return false;
      if (op.param("rate") <= 0.0 || op.param("rate") >= 1.0)
        return fail(why, "Dropout rate must be in (0,1)");
      return true;
    case OpKind::AveragePool:
    case OpKind::MaxPool:
      if (!expect_keys({"window"})) return false;
      if (op.window() < 2) return fail(why, "pooling needs window >= 2");
      return true;
  }
  return fail(why, "unknown op kind");
}

PrimitiveOp make_dense(std::int64_t features) {
  return {OpKind::Dense, {{"features", double(features)}}};
}
PrimitiveOp make_conv(std::int64_t features, std::int64_t kernel, std::int64_t stride) {
  return {OpKind::Convolution,
          {{"features", double(features)}, {"kernel", double(kernel)}, {"stride", double(stride)}}};
}
PrimitiveOp make_grouped_conv(std::int64_t features, std::int64_t kernel, std::int64_t groups,
                              std::int64_t stride) {
  return {OpKind::GroupedConvolution,
          {{"features", double(features)},
           {"groups", double(groups)},
           {"kernel", double(kernel)},
           {"stride", double(stride)}}};
}
PrimitiveOp make_dilated_conv(std::int64_t features, std::int64_t kernel, std::int64_t dilation) {
  return {OpKind::DilatedConvolution,
          {{"dilation", double(dilation)},
           {"features", double(features)},
           {"kernel", double(kernel)},
           {"stride", 1.0}}};
}
PrimitiveOp make_add() { return {OpKind::Add, {}}; }
PrimitiveOp make_scalar_multiply(double value) { return {OpKind::ScalarMultiply, {{"value", value}}}; }
PrimitiveOp make_activation(OpKind kind) { return {kind, {}}; }
PrimitiveOp make_batch_norm(double momentum) { return {OpKind::BatchNorm, {{"momentum", momentum}}}; }
PrimitiveOp make_layer_norm() { return {OpKind::LayerNorm, {}}; }
PrimitiveOp make_group_norm(std::int64_t groups) { return {OpKind::GroupNorm, {{"groups", double(groups)}}}; }
PrimitiveOp make_dropout(double rate) { return {OpKind::Dropout, {{"rate", rate}}}; }
PrimitiveOp make_pool(OpKind kind, std::int64_t window) { return {kind, {{"window", double(window)}}}; }

std::vector<PrimitiveOp> op_catalog(const CatalogConfig& cfg) {
  std::vector<std::int64_t> feats = cfg.features_absolute;
  for (auto [num, den] : cfg.feature_ratios) {
    if (den < 1 || num < 1) throw std::invalid_argument("op_catalog: bad feature ratio");
    feats.push_back(std::max<std::int64_t>(1, cfg.reference_channels * num / den));
  }
  std::sort(feats.begin(), feats.end());
  feats.erase(std::unique(feats.begin(), feats.end()), feats.end());

  const bool needs_feats = cfg.with_dense || cfg.with_convolution || cfg.with_grouped || cfg.with_dilated;
  if (needs_feats && feats.empty()) throw std::invalid_argument("op_catalog: empty feature grid");
  if ((cfg.with_convolution || cfg.with_grouped || cfg.with_dilated) && cfg.kernels.empty())
    throw std::invalid_argument("op_catalog: empty kernel grid");
  if (cfg.with_pooling && cfg.pool_windows.empty())
    throw std::invalid_argument("op_catalog: empty pool window grid");
  if (cfg.with_grouped && cfg.group_counts.empty())
    throw std::invalid_argument("op_catalog: empty group grid");
  if (cfg.with_dilated && cfg.dilations.empty())
    throw std::invalid_argument("op_catalog: empty dilation grid");

  std::vector<PrimitiveOp> out;
  if (cfg.with_dense)
    for (auto f : feats) out.push_back(make_dense(f));
  if (cfg.with_convolution)
    for (auto f : feats)
      for (auto k : cfg.kernels) {
        out.push_back(make_conv(f, k, 1));
        if (k > 1) out.push_back(make_conv(f, k, k));
      }
  if (cfg.with_grouped)
    for (auto f : feats)
      for (auto k : cfg.kernels)
        for (auto g : cfg.group_counts) {
          if (f % g != 0) continue;
          out.push_back(make_grouped_conv(f, k, g, 1));
          if (k > 1) out.push_back(make_grouped_conv(f, k, g, k));
        }
  if (cfg.with_dilated)
    for (auto f : feats)
      for (auto k : cfg.kernels) {
        if (k < 2) continue;
        for (auto d : cfg.dilations) out.push_back(make_dilated_conv(f, k, d));
      }
  if (cfg.with_scalar_multiply)
    for (auto v : cfg.scalar_values) out.push_back(make_scalar_multiply(v));
  if (cfg.with_activations) {
    out.push_back(make_activation(OpKind::ReLU));
    out.push_back(make_activation(OpKind::GeLU));
    out.push_back(make_activation(OpKind::SiLU));
    out.push_back(make_activation(OpKind::Sigmoid));
  }
  if (cfg.with_softmax) out.push_back(make_activation(OpKind::Softmax));
  if (cfg.with_norms) {
    for (auto m : cfg.batchnorm_momentums) out.push_back(make_batch_norm(m));
    out.push_back(make_layer_norm());
    for (auto g : cfg.group_counts) out.push_back(make_group_norm(g));
  }
  if (cfg.with_dropout)
    for (auto r : cfg.dropout_rates) out.push_back(make_dropout(r));
  if (cfg.with_pooling)
    for (auto w : cfg.pool_windows) {
      out.push_back(make_pool(OpKind::AveragePool, w));
      out.push_back(make_pool(OpKind::MaxPool, w));
    }

  if (out.empty()) throw std::invalid_argument("op_catalog: configuration yields no operations");
  for (const auto& op : out) {
    std::string why;
    if (!op_params_valid(op, &why))
      throw std::logic_error("op_catalog produced invalid op " + op.display() + ": " + why);
  }
  return out;
}

}  // namespace propsynth
