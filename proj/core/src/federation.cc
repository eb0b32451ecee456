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


#include "pfdm/federation.h"

#include <future>
#include <sstream>

#include "pfdm/errors.h"
#include "pfdm/mlp_denoiser.h"
#include "pfdm/rng.h"

namespace pfdm {

DenoiserPlan DenoiserPlan::Trainable(TrainingConfig config, int num_labels) {
  DenoiserPlan plan;
  plan.kind = Kind::kTrainable;
  plan.training = std::move(config);
  plan.num_labels = num_labels;
  return plan;
}

DenoiserPlan DenoiserPlan::Oracle(GaussianMixtureSpec spec) {
  DenoiserPlan plan;
  plan.kind = Kind::kOracle;
  plan.oracle = std::move(spec);
  return plan;
}

TrainedDenoiser FitDenoiser(const DenoiserPlan& plan, const SampleBatch& data,
                            int t_max, const NoiseSchedule& schedule) {
  TrainedDenoiser out;
  if (plan.kind == DenoiserPlan::Kind::kOracle) {
    if (!plan.oracle) throw InvalidArgument("oracle plan without a mixture");
    out.denoiser = std::make_shared<OracleDenoiser>(*plan.oracle, schedule);
    return out;
  }
  auto net = BuildTrainableDenoiser(plan.training, data.shape(),
                                    plan.num_labels, schedule.T());
  out.trace = TrainDdpm(data, t_max, schedule, *net, plan.training);
  out.denoiser = std::move(net);
  return out;
}

ClientState::ClientState(std::uint32_t id, SampleBatch data, int t0_step,
                         NoiseSchedule sched, std::uint64_t client_seed)
    : client_id(id),
      dataset(std::move(data)),
      t0(t0_step),
      schedule(std::move(sched)),
      seed(client_seed),
      released(static_cast<std::size_t>(dataset.count()), false) {
  if (t0 < 1 || t0 > schedule.T()) {
    throw InvalidArgument("client: t0 must lie in [1, T]");
  }
  dataset.set_client_id(id);
}

void ClientTrainLocal(ClientState& state, const DenoiserPlan& plan) {
  if (state.dataset.count() < 1) {
    throw InvalidArgument("client " + std::to_string(state.client_id) +
                          ": empty dataset");
  }
  DenoiserPlan local = plan;
  local.training.seed = DeriveSeed(state.seed, "client/local-train");
  TrainedDenoiser fitted = FitDenoiser(local, state.dataset, state.t0,
                                       state.schedule);
  state.local_denoiser = std::move(fitted.denoiser);
  state.local_trace = std::move(fitted.trace);
}

NoisyDatasetMessage ClientNoisify(ClientState& state, Index n,
                                  std::uint64_t seed) {
  std::vector<Index> available;
  for (std::size_t i = 0; i < state.released.size(); ++i) {
    if (!state.released[i]) available.push_back(static_cast<Index>(i));
  }
  if (n < 1) throw InvalidArgument("noisify: N must be >= 1");
  if (n > static_cast<Index>(available.size())) {
    throw ProtocolViolation(
        "client " + std::to_string(state.client_id) + ": cannot release " +
        std::to_string(n) + " points, only " +
        std::to_string(available.size()) + " have never been released");
  }
  RngStream rng(seed, "client/noisify");
  const std::vector<Index> picks =
      rng.SampleWithoutReplacement(static_cast<Index>(available.size()), n);
  std::vector<Index> rows;
  rows.reserve(picks.size());
  for (Index p : picks) rows.push_back(available[static_cast<std::size_t>(p)]);

  const SampleBatch x0 = state.dataset.Select(rows);
  const Matrix z = rng.NormalMatrix(x0.count(), x0.dim());
  const SampleBatch noisy = Diffuse(x0, state.t0, z, state.schedule);
  for (Index r : rows) {
    state.released[static_cast<std::size_t>(r)] = true;
    state.release_log.push_back(r);
  }
  return NoisyDatasetMessage::FromBatch(state.client_id, state.t0,
                                        state.schedule.Fingerprint(), noisy);
}

void ServerState::Receive(const Bytes& bytes) {
  NoisyDatasetMessage msg = NoisyDatasetMessage::Decode(bytes);
  if (msg.fingerprint != schedule.Fingerprint()) {
    throw ProtocolViolation("client " + std::to_string(msg.client_id) +
                            " used a different noise schedule (fingerprint " +
                            FingerprintHex(msg.fingerprint) + ")");
  }
  if (msg.flat_dim != FlatSize(shape)) {
    throw ProtocolViolation("client " + std::to_string(msg.client_id) +
                            " sent samples of the wrong dimension");
  }
  if (received.contains(msg.client_id)) {
    throw ProtocolViolation("client " + std::to_string(msg.client_id) +
                            " sent more than one release");
  }
  const auto id = msg.client_id;
  received.emplace(id, std::move(msg));
}

SampleBatch ServerState::CombinedDataset() const {
  if (received.empty()) throw ProtocolViolation("server: no messages received");
  std::vector<SampleBatch> parts;
  for (const auto& [id, msg] : received) parts.push_back(msg.ToBatch(shape));
  return SampleBatch::Concatenate(parts);
}

void ServerTrainGlobal(ServerState& state, const DenoiserPlan& plan) {
  const SampleBatch combined = state.CombinedDataset();
  TrainedDenoiser fitted =
      FitDenoiser(plan, combined, state.schedule.T(), state.schedule);
  state.global_denoiser = std::move(fitted.denoiser);
  state.global_trace = std::move(fitted.trace);
}

SampleBatch PfdmSample(const Denoiser& global, const Denoiser* local,
                       const NoiseSchedule& schedule, int t0, Index count,
                       const SampleShape& shape, std::span<const int> labels,
                       std::uint64_t seed, const PfdmSamplingOptions& options) {
  if (t0 < 0 || t0 > schedule.T()) {
    throw InvalidArgument("pfdm sample: t0 must lie in [0, T]");
  }
  SamplingOptions global_opts;
  if (options.observer) {
    global_opts.observer = [&](int t, const SampleBatch& x) {
      options.observer(SamplingStage::kGlobal, t, x);
    };
  }
  SampleBatch x = SampleDdpm(global, schedule, schedule.T(), count, shape,
                             labels, seed, global_opts);
  if (t0 == 0) return x;
  if (local == nullptr) {
    throw InvalidArgument("pfdm sample: t0 > 0 needs a local denoiser");
  }
  SamplingOptions personal_opts;
  personal_opts.coefficient = options.personal_coefficient;
  if (options.observer) {
    personal_opts.observer = [&](int t, const SampleBatch& batch) {
      options.observer(SamplingStage::kPersonal, t, batch);
    };
  }
  RngStream rng(seed, "sample/personal");
  return RunReverseChain(std::move(x), t0, *local, schedule, rng,
                         personal_opts);
}

const ClientState& FederationResult::client(std::uint32_t id) const {
  for (const auto& c : clients) {
    if (c.client_id == id) return c;
  }
  throw InvalidArgument("no client with id " + std::to_string(id));
}

std::unique_ptr<FederationResult> RunFederation(const FederationConfig& config,
                                                Transport& transport) {
  if (config.clients.empty()) {
    throw InvalidArgument("federation: need at least one client");
  }
  auto result = std::make_unique<FederationResult>();
  for (const auto& c : config.clients) {
    result->clients.emplace_back(c.client_id, c.dataset, config.t0,
                                 config.schedule, c.seed);
  }

  auto run_client = [&](std::size_t i) -> std::optional<ClientFailure> {
    const ClientConfig& cfg = config.clients[i];
    ClientState& state = result->clients[i];
    try {
      ClientTrainLocal(state, cfg.local);
      const Index n = cfg.release_count.value_or(state.dataset.count());
      const NoisyDatasetMessage msg =
          ClientNoisify(state, n, DeriveSeed(state.seed, "client/release"));
      ClientChannel(state.client_id, transport, result->audit).Send(msg);
    } catch (const std::exception& e) {
      return ClientFailure{cfg.client_id, e.what()};
    }
    return std::nullopt;
  };

  std::vector<std::optional<ClientFailure>> outcomes(config.clients.size());
  if (config.parallel_clients) {
    std::vector<std::future<std::optional<ClientFailure>>> futures;
    for (std::size_t i = 0; i < config.clients.size(); ++i) {
      futures.push_back(std::async(std::launch::async, run_client, i));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) outcomes[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < config.clients.size(); ++i) {
      outcomes[i] = run_client(i);
    }
  }
  for (auto& o : outcomes) {
    if (o) result->failures.push_back(std::move(*o));
  }
  if (!result->failures.empty()) return result;

  auto server = std::make_unique<ServerState>(config.schedule, config.shape);
  for (const Bytes& frame : transport.Collect(config.clients.size())) {
    server->Receive(frame);
  }
  ServerTrainGlobal(*server, config.global);
  result->server = std::move(server);
  return result;
}

}  // namespace pfdm
