// Copyright 2026 The privctrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference against the OpenMP kernels: batched QP solves and the
// batched adversary loss/gradient.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "privctrl/adversary.hpp"
#include "privctrl/battery_qp.hpp"
#include "privctrl/qp_engine.hpp"

namespace {

using namespace privctrl;

std::vector<CanonicalQP> instances(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.4);
  const BatterySpec spec;
  const PriceSchedule price = build_tou_prices(24);
  std::vector<CanonicalQP> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector d(24);
    for (Index j = 0; j < 24; ++j) d(j) = 1.0 + g(rng) + (j >= 16 && j < 21 ? 2.0 : 0.0);
    out.push_back(build_qp_epigraph_form(spec, price, d));
  }
  return out;
}

void BM_SolveBatchSerial(benchmark::State& state) {
  const auto qps = instances(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_batch_serial(qps));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SolveBatchSerial)->Arg(8)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_SolveBatchParallel(benchmark::State& state) {
  const auto qps = instances(static_cast<std::size_t>(state.range(0)));
  SolverConfig cfg;
  cfg.threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(solve_batch(qps, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SolveBatchParallel)
    ->ArgsProduct({{8, 32, 128}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

struct AdversaryBatch {
  MlpParams params = init_params(24, 2);
  Matrix inputs;
  Matrix targets;

  explicit AdversaryBatch(Index m) : inputs(m, 24), targets(Matrix::Zero(m, 2)) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = g(rng);
    for (Index i = 0; i < m; ++i) targets(i, i % 2) = 1.0;
  }
};

void BM_BatchLossGradSerial(benchmark::State& state) {
  const AdversaryBatch b(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_grad_serial(b.params, b.inputs, b.targets));
}
BENCHMARK(BM_BatchLossGradSerial)->Arg(32)->Arg(512)->UseRealTime();

void BM_BatchLossGradParallel(benchmark::State& state) {
  const AdversaryBatch b(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_loss_grad(b.params, b.inputs, b.targets, threads));
  }
}
BENCHMARK(BM_BatchLossGradParallel)->ArgsProduct({{32, 512}, {1, 2, 4, 8}})->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
