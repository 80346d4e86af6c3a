// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to compare.
#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "qgnn/kernels.hpp"
#include "qgnn/loss.hpp"
#include "qgnn/model.hpp"
#include "qgnn/pbs.hpp"
#include "qgnn/rng.hpp"
#include "qgnn/synthetic.hpp"

namespace {

using namespace qgnn;

Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(rows, cols);
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

template <void (*Kernel)(const Tensor&, const Tensor&, Tensor&)>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, 64, 1);
  const auto b = random_tensor(64, 64, 2);
  Tensor out(n, 64);
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 64));
}
BENCHMARK(BM_matmul<kernels::matmul_serial>)->Name("matmul/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_matmul<kernels::matmul>)->Name("matmul/parallel")->Arg(256)->Arg(4096);

template <void (*Kernel)(const Tensor&, const Tensor&, Tensor&)>
void BM_matmul_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, 64, 3);
  const auto b = random_tensor(n, 64, 4);
  Tensor out(64, 64);
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_matmul_tn<kernels::matmul_tn_serial>)->Name("matmul_tn/serial")->Arg(4096);
BENCHMARK(BM_matmul_tn<kernels::matmul_tn>)->Name("matmul_tn/parallel")->Arg(4096);

template <void (*Kernel)(const Tensor&, std::span<const int>, Tensor&)>
void BM_segment_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor(n, 64, 5);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i / 16);
  for (auto _ : state) {
    Tensor out(n / 16 + 1, 64);
    Kernel(x, ids, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_segment_sum<kernels::segment_sum_serial>)->Name("segment_sum/serial")->Arg(65536);
BENCHMARK(BM_segment_sum<kernels::segment_sum>)->Name("segment_sum/parallel")->Arg(65536);

// Candidate evaluation inside one PBS step: every single flip of the top
// candidates on a 3-layer GIN over a 64-graph batch.
struct FlipSetFixture {
  Dataset data = gen_wl_task(TaskFamily::cycles_vs_paths, 32, {5, 12}, 9);
  ModelParams model;
  GraphBatch batch;
  BatchTargets targets;
  std::vector<std::vector<BitRef>> sets;

  FlipSetFixture() {
    ModelConfig c;
    c.num_layers = 3;
    c.hidden_dim = 16;
    c.seed = 3;
    model = init_model(c);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    batch = make_batch(data, idx, 1);
    targets = batch_targets(data, idx);
    for (std::size_t t = 0; t < model.weights.size(); ++t) {
      for (std::size_t e = 0; e < 8 && e < model.weights[t].q.size(); ++e) sets.push_back({{t, e, 6}});
    }
  }

  Objective objective() const {
    return [this](Tape& tape, const ModelParams& p) {
      const auto bind = bind_model(tape, p);
      return supervised_loss(tape, LossKind::bce_masked, model_forward(tape, p.config, bind, batch), targets);
    };
  }
};

template <bool Parallel>
void BM_flip_sets(benchmark::State& state) {
  static const FlipSetFixture f;
  const auto obj = f.objective();
  for (auto _ : state) {
    auto r = Parallel ? evaluate_flip_sets(f.model, obj, f.sets) : evaluate_flip_sets_serial(f.model, obj, f.sets);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.sets.size()));
}
BENCHMARK(BM_flip_sets<false>)->Name("evaluate_flip_sets/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_flip_sets<true>)->Name("evaluate_flip_sets/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
