// Serial vs OpenMP comparison for the batch kernels: the contribution-pattern
// oracle, batched greedy synthesis, and the covering sampler. The serial path
// is the reference implementation the tests check against; this target reports
// the speedup of the parallel path.

#include <chrono>
#include <cstdio>
#include <vector>

#include "propsynth/abstract.hpp"
#include "propsynth/distance.hpp"
#include "propsynth/oracle.hpp"
#include "propsynth/parallel.hpp"
#include "propsynth/synth.hpp"

using namespace propsynth;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds_since(t0);
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.3fs   omp %8.3fs   speedup %5.2fx\n", name, serial, parallel,
              parallel > 0 ? serial / parallel : 0.0);
}

volatile std::int64_t sink = 0;

void bench_oracle(ExecPolicy policy, double* out) {
  const TensorShape shape{2, 6, 6, 4};
  const auto ops = std::vector<PrimitiveOp>{make_conv(8, 3, 1), make_dense(8),
                                            make_pool(OpKind::AveragePool, 2), make_layer_norm()};
  *out = timed([&] {
    OracleOptions opt;
    opt.policy = policy;
    for (const auto& op : ops) sink = sink + concrete_mixing(op, shape, opt).rows();
    sink = sink + concrete_mixing_chain(
                      {make_conv(8, 3, 1), make_activation(OpKind::ReLU), make_dense(4)}, shape, opt)
                      .rows();
  });
}

void bench_greedy(ExecPolicy policy, double* out) {
  CatalogConfig cfg;
  cfg.reference_channels = 8;
  const auto catalog = op_catalog(cfg);
  const TensorShape shape{1, 8, 8, 8};
  const auto classes = compress_catalog(catalog, shape);
  const auto reps = class_representatives(classes);
  Rng rng(7);
  std::vector<SynthesisTask> tasks;
  for (int i = 0; i < 400; ++i) {
    PropertyState s = identity_state(shape);
    for (int step = 0; step < 5; ++step) {
      const auto& op = reps[rng.uniform_index(reps.size())];
      if (auto next = append_abstract(s, op)) s = *next;
    }
    SynthesisTask t;
    t.input_shape = shape;
    t.target.mixing = s.mixing;
    t.target.depth = s.depth.count;
    t.target.shape = s.shape;
    t.catalog = reps;
    tasks.push_back(std::move(t));
  }
  // Batch-level data parallelism: tasks are independent, each runs the
  // serial greedy loop inside.
  std::vector<std::int64_t> steps(tasks.size(), 0);
  *out = timed([&] {
    parallel_for(policy, static_cast<std::int64_t>(tasks.size()), [&](std::int64_t i) {
      steps[static_cast<std::size_t>(i)] =
          greedy_synthesize(tasks[static_cast<std::size_t>(i)]).accounting.steps;
    });
  });
  for (auto s : steps) sink = sink + s;
}

void bench_covering(ExecPolicy policy, double* out) {
  CatalogConfig cfg;
  cfg.reference_channels = 4;
  const auto catalog = op_catalog(cfg);
  *out = timed([&] {
    CoveringCheckOptions opt;
    opt.samples = 400;
    opt.policy = policy;
    sink = sink + covering_check(catalog, opt).covered;
  });
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", hardware_threads());
  double s = 0, p = 0;
  bench_oracle(ExecPolicy::Serial, &s);  // warmup
  bench_greedy(ExecPolicy::Serial, &s);  // warmup (fills the closure cache)
  bench_covering(ExecPolicy::Serial, &s);  // warmup
  bench_oracle(ExecPolicy::Serial, &s);
  bench_oracle(ExecPolicy::Parallel, &p);
  report("contribution oracle", s, p);
  bench_greedy(ExecPolicy::Serial, &s);
  bench_greedy(ExecPolicy::Parallel, &p);
  report("greedy synthesis x400", s, p);
  bench_covering(ExecPolicy::Serial, &s);
  bench_covering(ExecPolicy::Parallel, &p);
  report("covering sampler x400", s, p);
  return 0;
}
