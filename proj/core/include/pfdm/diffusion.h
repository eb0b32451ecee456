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


#ifndef PFDM_DIFFUSION_H_
#define PFDM_DIFFUSION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pfdm/denoiser.h"
#include "pfdm/rng.h"
#include "pfdm/sample_batch.h"
#include "pfdm/schedule.h"
#include "pfdm/training_config.h"

namespace pfdm {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) z, elementwise.
SampleBatch Diffuse(const SampleBatch& x0, int t, const Matrix& z,
                    const NoiseSchedule& schedule);

// Batch mean of ||z - denoiser(diffuse(x0, t, z), t, label)||^2.
double DdpmLoss(const Denoiser& denoiser, const SampleBatch& x0, int t,
                const Matrix& z, const NoiseSchedule& schedule);

struct TrainingTrace {
  std::vector<double> step_loss;
  std::vector<int> step_min_t;
  std::vector<int> step_max_t;
  // Mean step loss over each pass through the shuffled dataset.
  std::vector<double> epoch_mean_loss;
};

// Simplified-objective training with t ~ Uniform{1..t_max}. Mutates a
// trainable denoiser in place; a non-trainable one is only evaluated, so the
// trace then holds evaluation losses. Deterministic given config.seed.
TrainingTrace TrainDdpm(const SampleBatch& dataset, int t_max,
                        const NoiseSchedule& schedule, Denoiser& denoiser,
                        const TrainingConfig& config);

// How the reverse update scales x_t. kSqrtOneMinusBeta is the usual DDPM
// posterior-mean form; kOneMinusBeta evaluates 1/alpha_t literally with
// alpha_t = 1 - beta_t and (1 - alpha_t) in the noise coefficient.
enum class ReverseCoefficient { kSqrtOneMinusBeta, kOneMinusBeta };

// One ancestral step x_t -> x_{t-1}. `z` may be empty (treated as zero); a
// nonzero z at t = 1 is rejected.
SampleBatch ReverseStep(const SampleBatch& x_t, int t, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, const Matrix& z,
                        ReverseCoefficient coefficient =
                            ReverseCoefficient::kSqrtOneMinusBeta);

// Observer invoked after each reverse step with (t_after, batch); t_after is
// the index of the produced latent, so the last call sees t_after = 0.
using TrajectoryObserver = std::function<void(int, const SampleBatch&)>;

struct SamplingOptions {
  ReverseCoefficient coefficient = ReverseCoefficient::kSqrtOneMinusBeta;
  TrajectoryObserver observer;
};

// Runs reverse steps t = t_start..t_end on `start`, drawing fresh noise for
// every t > 1 from `rng`.
SampleBatch RunReverseChain(SampleBatch start, int t_start,
                            const Denoiser& denoiser,
                            const NoiseSchedule& schedule, RngStream& rng,
                            const SamplingOptions& options = {});

// Draws x_{t_start} ~ N(0, I) and denoises to x_0. `labels` is either empty or
// one label per sample.
SampleBatch SampleDdpm(const Denoiser& denoiser, const NoiseSchedule& schedule,
                       int t_start, Index count, const SampleShape& shape,
                       std::span<const int> labels, std::uint64_t seed,
                       const SamplingOptions& options = {});

}  // namespace pfdm

#endif  // PFDM_DIFFUSION_H_
