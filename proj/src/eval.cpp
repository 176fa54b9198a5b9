#include "propsynth/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "propsynth/op_semantics.hpp"

namespace propsynth {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DenseTensor elementwise(const DenseTensor& in, double (*f)(double)) {
  DenseTensor out = in;
  for (auto& x : out.v) x = f(x);
  return out;
}

// Per-dimension tap tables: taps[d][o] lists (tap index, input position) for
// output position o along spatial dim d. Precomputing them once keeps the
// inner loops allocation-free.
using TapTable = std::vector<std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>>>;

TapTable tap_tables(const TensorShape& in, const TensorShape& out, std::int64_t k,
                    std::int64_t stride, std::int64_t dilation) {
  TapTable taps(static_cast<std::size_t>(in.spatial_rank()));
  for (int d = 0; d < in.spatial_rank(); ++d) {
    taps[static_cast<std::size_t>(d)].resize(static_cast<std::size_t>(out.spatial(d)));
    for (std::int64_t o = 0; o < out.spatial(d); ++o)
      taps[static_cast<std::size_t>(d)][static_cast<std::size_t>(o)] =
          window_taps(in.spatial(d), o, k, stride, dilation);
  }
  return taps;
}

// Calls body(tap_flat, in_spatial_flat_base) for every in-bounds tap of the
// window anchored at the given output spatial position.
template <class F>
void scan_window(const TapTable& taps, const std::vector<std::int64_t>& oidx,
                 const TensorShape& in, std::int64_t kernel, F&& body) {
  const int sr = static_cast<int>(taps.size());
  std::vector<std::size_t> sel(static_cast<std::size_t>(sr), 0);
  for (int d = 0; d < sr; ++d)
    if (taps[static_cast<std::size_t>(d)][static_cast<std::size_t>(oidx[static_cast<std::size_t>(d) + 1])]
            .empty())
      return;
  while (true) {
    std::int64_t tap_flat = 0;
    std::int64_t pos_flat = oidx[0];  // batch component
    for (int d = 0; d < sr; ++d) {
      const auto& t = taps[static_cast<std::size_t>(
          d)][static_cast<std::size_t>(oidx[static_cast<std::size_t>(d) + 1])][sel[static_cast<std::size_t>(d)]];
      tap_flat = tap_flat * kernel + t.first;
      pos_flat = pos_flat * in.spatial(d) + t.second;
    }
    body(tap_flat, pos_flat * in.channels());
    int d = sr;
    while (d-- > 0) {
      const auto& row =
          taps[static_cast<std::size_t>(d)][static_cast<std::size_t>(oidx[static_cast<std::size_t>(d) + 1])];
      if (++sel[static_cast<std::size_t>(d)] < row.size()) break;
      sel[static_cast<std::size_t>(d)] = 0;
      if (d == 0) return;
    }
  }
}

DenseTensor conv_family(const PrimitiveOp& op, const DenseTensor& in, const TensorShape& out_shape,
                        const WeightAssignment& w) {
  const std::int64_t groups = op.kind == OpKind::GroupedConvolution ? op.groups() : 1;
  const std::int64_t dil = op.kind == OpKind::DilatedConvolution ? op.dilation() : 1;
  const std::int64_t cin = in.shape.channels();
  const std::int64_t cout = op.features();
  const std::int64_t cin_per_group = cin / groups;
  const std::int64_t cout_per_group = cout / groups;
  const auto taps = tap_tables(in.shape, out_shape, op.kernel(), op.stride(), dil);
  // Flat index of the all-center tap, for the delta-kernel mode.
  std::int64_t center_tap = 0;
  for (int s = 0; s < in.shape.spatial_rank(); ++s)
    center_tap = center_tap * op.kernel() + (op.kernel() - 1) / 2;

  // Weights per (tap, cl, co), materialized once.
  const std::int64_t tap_count = static_cast<std::int64_t>(std::pow(op.kernel(), in.shape.spatial_rank()));
  std::vector<double> kernel_w(static_cast<std::size_t>(tap_count * cin_per_group * cout));
  for (std::int64_t tap = 0; tap < tap_count; ++tap)
    for (std::int64_t cl = 0; cl < cin_per_group; ++cl)
      for (std::int64_t co = 0; co < cout; ++co) {
        double wv;
        if (w.center_tap_only())
          wv = tap == center_tap
                   ? w.weight(static_cast<std::uint64_t>(cl), static_cast<std::uint64_t>(co), 0, 2)
                   : 0.0;
        else
          wv = w.weight(static_cast<std::uint64_t>(tap), static_cast<std::uint64_t>(cl),
                        static_cast<std::uint64_t>(co), 1);
        kernel_w[static_cast<std::size_t>((tap * cin_per_group + cl) * cout + co)] = wv;
      }

  DenseTensor out(out_shape);
  // Iterate output positions without the channel dim; fill all channels per
  // window scan.
  TensorShape out_positions = out_shape;
  out_positions.dims.back() = 1;
  for_each_index(out_positions, [&](const std::vector<std::int64_t>& oidx) {
    const std::int64_t out_base = out.flat(oidx);  // channel 0 of this position
    scan_window(taps, oidx, in.shape, op.kernel(), [&](std::int64_t tap, std::int64_t in_base) {
      for (std::int64_t co = 0; co < cout; ++co) {
        const std::int64_t g = co / cout_per_group;
        double acc = 0.0;
        const double* wrow = kernel_w.data() + (tap * cin_per_group) * cout + co;
        const double* xin = in.v.data() + in_base + g * cin_per_group;
        for (std::int64_t cl = 0; cl < cin_per_group; ++cl) acc += xin[cl] * wrow[cl * cout];
        out.v[static_cast<std::size_t>(out_base + co)] += acc;
      }
    });
  });
  return out;
}

DenseTensor pool(const PrimitiveOp& op, const DenseTensor& in, const TensorShape& out_shape, bool average) {
  const auto taps = tap_tables(in.shape, out_shape, op.window(), op.window(), 1);
  const std::int64_t c = in.shape.channels();
  DenseTensor out(out_shape);
  TensorShape out_positions = out_shape;
  out_positions.dims.back() = 1;
  for_each_index(out_positions, [&](const std::vector<std::int64_t>& oidx) {
    const std::int64_t out_base = out.flat(oidx);
    std::int64_t n = 0;
    bool first = true;
    scan_window(taps, oidx, in.shape, op.window(), [&](std::int64_t, std::int64_t in_base) {
      ++n;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double x = in.v[static_cast<std::size_t>(in_base + ch)];
        double& o = out.v[static_cast<std::size_t>(out_base + ch)];
        if (average)
          o += x;
        else
          o = first ? x : std::max(o, x);
      }
      first = false;
    });
    if (average && n > 0)
      for (std::int64_t ch = 0; ch < c; ++ch) out.v[static_cast<std::size_t>(out_base + ch)] /= static_cast<double>(n);
  });
  return out;
}

// Mean over a channel span [c0, c0+len), holding the other indices fixed.
double channel_mean(const DenseTensor& in, std::vector<std::int64_t> idx, std::int64_t c0,
                    std::int64_t len) {
  double m = 0.0;
  for (std::int64_t c = 0; c < len; ++c) {
    idx.back() = c0 + c;
    m += in.at(idx);
  }
  return m / static_cast<double>(len);
}

}  // namespace

DenseTensor eval_op(const PrimitiveOp& op, const std::vector<DenseTensor>& inputs,
                    const WeightAssignment& w) {
  std::vector<TensorShape> shapes;
  for (const auto& t : inputs) shapes.push_back(t.shape);
  auto out_shape = op_output_shape(op, shapes);
  if (!out_shape)
    throw std::invalid_argument("eval_op: " + op.display() + " incompatible with given shapes");
  const DenseTensor& in = inputs[0];

  switch (op.kind) {
    case OpKind::Dense: {
      DenseTensor out(*out_shape);
      const std::int64_t cin = in.shape.channels();
      for_each_index(*out_shape, [&](const std::vector<std::int64_t>& oidx) {
        const std::int64_t co = oidx.back();
        double acc = 0.0;
        std::vector<std::int64_t> iidx = oidx;
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          iidx.back() = ci;
          acc += in.at(iidx) * w.weight(static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(co), 0, 2);
        }
        out.at(oidx) = acc;
      });
      return out;
    }
    case OpKind::Convolution:
    case OpKind::GroupedConvolution:
    case OpKind::DilatedConvolution:
      return conv_family(op, in, *out_shape, w);
    case OpKind::Add: {
      DenseTensor out = inputs[0];
      for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += inputs[1].v[i];
      return out;
    }
    case OpKind::ScalarMultiply: {
      DenseTensor out = in;
      const double c = op.param("value");
      for (auto& x : out.v) x *= c;
      return out;
    }
    case OpKind::ReLU:
      return elementwise(in, [](double x) { return x > 0.0 ? x : 0.0; });
    case OpKind::GeLU:
      return elementwise(in, [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); });
    case OpKind::SiLU:
      return elementwise(in, [](double x) { return x * sigmoid(x); });
    case OpKind::Sigmoid:
      return elementwise(in, [](double x) { return sigmoid(x); });
    case OpKind::Softmax: {
      DenseTensor out = in;
      const std::int64_t c = in.shape.channels();
      const std::int64_t slices = in.shape.elements() / c;
      for (std::int64_t s = 0; s < slices; ++s) {
        double* p = out.v.data() + s * c;
        double mx = p[0];
        for (std::int64_t i = 1; i < c; ++i) mx = std::max(mx, p[i]);
        double z = 0.0;
        for (std::int64_t i = 0; i < c; ++i) z += std::exp(p[i] - mx);
        for (std::int64_t i = 0; i < c; ++i) p[i] = std::exp(p[i] - mx) / z;
      }
      return out;
    }
    case OpKind::BatchNorm: {
      DenseTensor out = in;
      for_each_index(in.shape, [&](const std::vector<std::int64_t>& idx) {
        out.at(idx) = in.at(idx) * w.scale(static_cast<std::uint64_t>(idx.back()));
      });
      return out;
    }
    case OpKind::LayerNorm:
    case OpKind::GroupNorm: {
      const std::int64_t c = in.shape.channels();
      const std::int64_t span = op.kind == OpKind::LayerNorm ? c : c / op.groups();
      DenseTensor out = in;
      for_each_index(in.shape, [&](const std::vector<std::int64_t>& idx) {
        const std::int64_t c0 = idx.back() / span * span;
        const double m = channel_mean(in, idx, c0, span);
        out.at(idx) = (in.at(idx) - m) * w.scale(static_cast<std::uint64_t>(idx.back()));
      });
      return out;
    }
    case OpKind::Dropout:
      return in;  // inference mode
    case OpKind::AveragePool:
      return pool(op, in, *out_shape, true);
    case OpKind::MaxPool:
      return pool(op, in, *out_shape, false);
  }
  throw std::invalid_argument("eval_op: unknown op kind");
}

DenseTensor eval_chain(const std::vector<PrimitiveOp>& ops, const DenseTensor& input,
                       std::uint64_t seed) {
  DenseTensor cur = input;
  for (std::size_t i = 0; i < ops.size(); ++i)
    cur = eval_op(ops[i], cur, WeightAssignment(splitmix64(seed + 0x9e37 * (i + 1))));
  return cur;
}

}  // namespace propsynth
