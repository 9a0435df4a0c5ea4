#include <benchmark/benchmark.h>

#include "bprnn/activation.hpp"
#include "bprnn/random.hpp"
#include "bprnn/tensor.hpp"

using namespace bprnn;

static void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor2D a = sample_gaussian(rng, n, n, 0, 1);
  const Tensor2D b = sample_gaussian(rng, n, 128, 0, 1);
  Tensor2D c(n, 128);
  for (auto _ : state) {
    c.fill(0.0);
    kernels::gemm_accumulate(c, a, Transpose::No, b, Transpose::No);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * 128));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

static void BM_GemmTransposedA(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor2D a = sample_gaussian(rng, n, n, 0, 1);
  const Tensor2D b = sample_gaussian(rng, n, 128, 0, 1);
  Tensor2D c(n, 128);
  for (auto _ : state) {
    c.fill(0.0);
    kernels::gemm_accumulate(c, a, Transpose::Yes, b, Transpose::No);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * 128));
}
BENCHMARK(BM_GemmTransposedA)->Arg(64)->Arg(256);

static void BM_Normal(benchmark::State& state) {
  Rng rng(3);
  double acc = 0;
  for (auto _ : state) acc += rng.normal();
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Normal);

static void BM_Activation(benchmark::State& state) {
  const auto spec = state.range(0) == 0 ? ActivationSpec::relu(true) : ActivationSpec::elu(1.0, true);
  Rng rng(4);
  const Tensor2D x = sample_gaussian(rng, 256, 128, 0, 1);
  Tensor2D y = x;
  for (auto _ : state) {
    y = x;
    apply_inplace(spec, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Activation)->Arg(0)->Arg(1);

static void BM_MeanShiftProbe(benchmark::State& state) {
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mean_shift_probe(ActivationSpec::relu(true), 1.0, 100000, rng));
  }
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_MeanShiftProbe);
BENCHMARK_MAIN();
