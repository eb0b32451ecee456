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


#ifndef PFDM_FEDERATION_H_
#define PFDM_FEDERATION_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfdm/diffusion.h"
#include "pfdm/oracle_denoiser.h"
#include "pfdm/sample_batch.h"
#include "pfdm/schedule.h"
#include "pfdm/training_config.h"
#include "pfdm/transport.h"
#include "pfdm/wire.h"

namespace pfdm {

// How a denoiser is obtained: trained from data, or the analytic oracle for a
// known Gaussian-mixture target (used for training-free validation).
struct DenoiserPlan {
  enum class Kind { kTrainable, kOracle };
  Kind kind = Kind::kTrainable;
  TrainingConfig training;
  int num_labels = 0;
  std::optional<GaussianMixtureSpec> oracle;

  static DenoiserPlan Trainable(TrainingConfig config, int num_labels = 0);
  static DenoiserPlan Oracle(GaussianMixtureSpec spec);
};

// Builds and (for trainable plans) trains a denoiser on `data` over steps
// 1..t_max.
struct TrainedDenoiser {
  std::shared_ptr<Denoiser> denoiser;
  TrainingTrace trace;
};
TrainedDenoiser FitDenoiser(const DenoiserPlan& plan, const SampleBatch& data,
                            int t_max, const NoiseSchedule& schedule);

// Client-side state. The dataset and the local denoiser are private: nothing
// here is serialisable for transmission; only NoisyDatasetMessage leaves.
struct ClientState {
  std::uint32_t client_id = 0;
  SampleBatch dataset;
  int t0 = 1;
  NoiseSchedule schedule;
  std::uint64_t seed = 0;

  std::shared_ptr<Denoiser> local_denoiser;
  TrainingTrace local_trace;
  // released[i] is set once dataset row i has been noisified.
  std::vector<bool> released;
  std::vector<Index> release_log;

  ClientState(std::uint32_t id, SampleBatch data, int t0_step,
              NoiseSchedule sched, std::uint64_t client_seed);
};

// Trains the personal denoiser on steps 1..t0.
void ClientTrainLocal(ClientState& state, const DenoiserPlan& plan);

// Releases `n` distinct, never-before-released points diffused to t0.
NoisyDatasetMessage ClientNoisify(ClientState& state, Index n,
                                  std::uint64_t seed);

struct ServerState {
  NoiseSchedule schedule;
  SampleShape shape;
  std::map<std::uint32_t, NoisyDatasetMessage> received;
  std::shared_ptr<Denoiser> global_denoiser;
  TrainingTrace global_trace;

  ServerState(NoiseSchedule sched, SampleShape sample_shape)
      : schedule(std::move(sched)), shape(std::move(sample_shape)) {}

  // Decodes, checks the schedule fingerprint and rejects duplicate senders.
  void Receive(const Bytes& bytes);
  // Concatenation of all received noisy samples in client-id order.
  SampleBatch CombinedDataset() const;
};

// Trains the shared denoiser on the combined noisy data over all T steps,
// treating the released samples as clean inputs.
void ServerTrainGlobal(ServerState& state, const DenoiserPlan& plan);

enum class SamplingStage { kGlobal, kPersonal };

struct PfdmSamplingOptions {
  ReverseCoefficient personal_coefficient =
      ReverseCoefficient::kSqrtOneMinusBeta;
  // (stage, t_after, batch) after every reverse step.
  std::function<void(SamplingStage, int, const SampleBatch&)> observer;
};

// Split sampling: the global denoiser runs T..1 from pure noise, its output is
// taken as x_{t0}, and the local denoiser runs t0..1. t0 == 0 skips the
// personal stage.
SampleBatch PfdmSample(const Denoiser& global, const Denoiser* local,
                       const NoiseSchedule& schedule, int t0, Index count,
                       const SampleShape& shape, std::span<const int> labels,
                       std::uint64_t seed,
                       const PfdmSamplingOptions& options = {});

struct ClientConfig {
  std::uint32_t client_id = 0;
  SampleBatch dataset;
  std::uint64_t seed = 0;
  // Defaults to the whole dataset.
  std::optional<Index> release_count;
  DenoiserPlan local;
};

struct FederationConfig {
  NoiseSchedule schedule = MakeLinearSchedule(1000, 1e-4, 0.02);
  int t0 = 100;
  SampleShape shape;
  std::vector<ClientConfig> clients;
  DenoiserPlan global;
  bool parallel_clients = false;
};

struct ClientFailure {
  std::uint32_t client_id;
  std::string message;
};

struct FederationResult {
  std::vector<ClientState> clients;
  std::unique_ptr<ServerState> server;
  std::vector<ClientFailure> failures;
  AuditLog audit;

  bool complete() const { return failures.empty() && server != nullptr; }
  const ClientState& client(std::uint32_t id) const;
};

// Train-local, noisify, send, combine, train-global. A failing client is
// recorded in `failures` and the server stage is skipped.
std::unique_ptr<FederationResult> RunFederation(const FederationConfig& config,
                                                Transport& transport);

}  // namespace pfdm

#endif  // PFDM_FEDERATION_H_
