#include <benchmark/benchmark.h>

#include "bprnn/adam.hpp"
#include "bprnn/lsuv.hpp"
#include "bprnn/rnn.hpp"
#include "bprnn/trainer.hpp"

using namespace bprnn;

namespace {

struct Setup {
  Model model;
  StackState state;
  TokenGrid in, tgt;
};

// depth x 64 bipolar ELU, batch 32, T = 50
Setup setup(std::size_t depth) {
  StackConfig cfg;
  cfg.depth = depth;
  cfg.width = 64;
  cfg.embedding_dim = 64;
  cfg.vocab_size = 27;
  Rng rng(7);
  Setup s{initialize_model(cfg, InitConfig{}, rng), zero_state(cfg, 32), TokenGrid(50, 32),
          TokenGrid(50, 32)};
  s.model.head.V = sample_gaussian(rng, 27, 64, 0, 0.1);
  for (std::size_t t = 0; t < 50; ++t)
    for (std::size_t b = 0; b < 32; ++b) {
      s.in.at(t, b) = static_cast<int>(rng.below(27));
      s.tgt.at(t, b) = static_cast<int>(rng.below(27));
    }
  return s;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const Setup s = setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto r = forward_sequence(s.model, s.state, s.in, s.tgt, DropoutMasks::none(), false);
    benchmark::DoNotOptimize(r.loss);
  }
  state.SetItemsProcessed(state.iterations() * 50 * 32);
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(36)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  Setup s = setup(static_cast<std::size_t>(state.range(0)));
  AdamState adam = make_adam_state(s.model);
  for (auto _ : state) {
    auto fwd = forward_sequence(s.model, s.state, s.in, s.tgt, DropoutMasks::none());
    adam_update(s.model, backward(fwd.cache, s.model, DropoutMasks::none()), adam, 2e-4);
  }
  state.SetItemsProcessed(state.iterations() * 50 * 32);
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(36)->Unit(benchmark::kMillisecond);

static void BM_LsuvInit(benchmark::State& state) {
  StackConfig cfg;
  cfg.depth = static_cast<std::size_t>(state.range(0));
  cfg.width = 64;
  cfg.embedding_dim = 64;
  cfg.vocab_size = 27;
  for (auto _ : state) {
    Rng rng(9);
    Model m = make_model(cfg, rng);
    benchmark::DoNotOptimize(lsuv_init_stack(m, LsuvConfig{}, rng));
  }
}
BENCHMARK(BM_LsuvInit)->Arg(36)->Unit(benchmark::kMillisecond);
