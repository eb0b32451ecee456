//
// Copyright 2026 The PFDM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//


#include <vector>

#include "benchmark/benchmark.h"
#include "pfdm/diffusion.h"
#include "pfdm/mlp_denoiser.h"
#include "pfdm/oracle_denoiser.h"
#include "pfdm/privacy.h"
#include "pfdm/rng.h"

namespace pfdm {
namespace {

MlpDenoiser MakeNet(Index dim) {
  MlpArchitecture arch;
  arch.input_dim = dim;
  arch.shape = {dim};
  arch.num_labels = 10;
  arch.num_steps = 1000;
  arch.hidden_widths = {256, 256};
  return MlpDenoiser(arch, 1);
}

void BM_MlpForward(benchmark::State& state) {
  const Index batch = state.range(0);
  const MlpDenoiser net = MakeNet(64);
  RngStream rng(1, "bench");
  const Matrix x = rng.NormalMatrix(batch, 64);
  const std::vector<int> steps(batch, 500), labels(batch, 3);
  for (auto _ : state) benchmark::DoNotOptimize(net.Predict(x, steps, labels));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(512);

void BM_MlpBackward(benchmark::State& state) {
  const Index batch = state.range(0);
  const MlpDenoiser net = MakeNet(64);
  RngStream rng(2, "bench");
  const Matrix x = rng.NormalMatrix(batch, 64), target = rng.NormalMatrix(batch, 64);
  const std::vector<int> steps(batch, 500), labels(batch, 3);
  std::vector<double> grad(net.num_parameters());
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.LossAndGradient(x, steps, labels, target, grad));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Arg(64);

void BM_ReverseStep(benchmark::State& state) {
  const NoiseSchedule s = MakeLinearSchedule(1000, 1e-4, 0.02);
  const MlpDenoiser net = MakeNet(64);
  RngStream rng(3, "bench");
  const SampleBatch x(rng.NormalMatrix(256, 64), {64}, std::vector<int>(256, 1));
  const Matrix z = rng.NormalMatrix(256, 64);
  for (auto _ : state) benchmark::DoNotOptimize(ReverseStep(x, 500, net, s, z));
}
BENCHMARK(BM_ReverseStep);

void BM_OraclePredict(benchmark::State& state) {
  const NoiseSchedule s = MakeLinearSchedule(1000, 1e-4, 0.02);
  RngStream rng(4, "bench");
  GaussianMixtureSpec spec;
  spec.means = rng.NormalMatrix(state.range(0), 16);
  spec.weights.assign(state.range(0), 1.0 / state.range(0));
  spec.variances.assign(state.range(0), 0.5);
  const OracleDenoiser oracle(spec, s);
  const Matrix x = rng.NormalMatrix(1024, 16);
  for (auto _ : state) benchmark::DoNotOptimize(oracle.PredictAt(x, 300));
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_OraclePredict)->Arg(2)->Arg(32);

void BM_BudgetSweep(benchmark::State& state) {
  const NoiseSchedule s = MakeLinearSchedule(1000, 1e-4, 0.02);
  for (auto _ : state) {
    benchmark::DoNotOptimize(BudgetSweep(s, 1.0, 1e-5, BoundMode::kPerCoordinate));
  }
}
BENCHMARK(BM_BudgetSweep);

}  // namespace
}  // namespace pfdm

BENCHMARK_MAIN();
