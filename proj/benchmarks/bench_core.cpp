// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "fnndg/fnndg.hpp"

namespace {

using namespace fnndg;

Matrix filled(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = Tensor::constant(filled(n, n, 1));
  const Tensor b = Tensor::constant(filled(n, n, 2));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulForward)->Arg(16)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = Tensor::parameter(filled(n, n, 1));
  const Tensor b = Tensor::parameter(filled(n, n, 2));
  for (auto _ : state) {
    Tape tape;
    const Tensor root = sum(matmul(tape.watch(a), tape.watch(b)));
    benchmark::DoNotOptimize(tape.backward(root));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64)->Arg(128);

struct StepFixture {
  Scenario scenario = default_recipe().generate();
  std::vector<Batch> batches = make_batches(scenario, {0, 1, 2}, 30, 1);
  NetworkSpec spec = default_network_spec(scenario.input_dim, scenario.num_classes);
};

// One epoch (100 steps of batch 30) of each regime on the default scenario.
void BM_TrainEpoch(benchmark::State& state) {
  const StepFixture fx;
  TrainConfig cfg;
  cfg.regime = static_cast<Regime>(state.range(0));
  cfg.network = fx.spec;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(fx.scenario, {0, 1, 2}, cfg));
  state.SetLabel(std::string(to_string(cfg.regime)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fx.batches.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_FnnLossStep(benchmark::State& state) {
  const StepFixture fx;
  const ModelParams params = init_params(fx.spec, 1);
  const Batch& batch = fx.batches.front();
  for (auto _ : state) {
    Tape tape;
    const ModelParams live = track(params, tape);
    const Tensor f = forward_features(live, batch.inputs);
    const LossTerms t = fnn_total(forward_logits(live, f), batch.labels, f, NormLossConfig{});
    benchmark::DoNotOptimize(tape.backward(t.total));
  }
}
BENCHMARK(BM_FnnLossStep);

}  // namespace

BENCHMARK_MAIN();
