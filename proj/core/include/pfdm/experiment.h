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


#ifndef PFDM_EXPERIMENT_H_
#define PFDM_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pfdm/classifier.h"
#include "pfdm/data.h"
#include "pfdm/denoiser.h"
#include "pfdm/eval.h"
#include "pfdm/privacy.h"
#include "pfdm/schedule.h"
#include "pfdm/training_config.h"

namespace pfdm {

enum class RunMode { kPfdm, kNonCollaborative, kNonPrivate };
std::string ToString(RunMode mode);
RunMode ParseRunMode(const std::string& text);

struct DataConfig {
  // "mnist_idx", "cifar10_bin" or "blobs" (labelled Gaussian blobs, for
  // smoke runs that need no files).
  std::string source = "mnist_idx";
  std::filesystem::path images;
  std::filesystem::path labels;
  std::vector<std::filesystem::path> cifar_batches;
  // Optional separate test files; otherwise a per-class holdout is used.
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  Index holdout_per_class = 100;
  int resize = 0;  // side length after area resampling; 0 keeps native
  PixelRange range = PixelRange::kUnit;

  std::vector<std::set<int>> clusters = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
  Index majority_count = 5000;
  Index minority_count = 50;

  // blobs source
  int blob_dim = 4;
  int blob_classes = 4;
  Index blob_per_class = 200;
};

struct EvalConfig {
  Index samples_per_class = 100;
  // Client whose generations are evaluated (its majority cluster is
  // clusters[majority], the other cluster is its minority).
  std::uint32_t client = 0;
  ClassifierConfig reference_classifier;
  ClassifierConfig downstream_classifier;
  std::vector<std::uint64_t> downstream_seeds = {0, 1, 2};
  Index mmd_max_samples = 500;
};

struct ExperimentConfig {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SigmaMode sigma_mode = SigmaMode::kBeta;
  int t0 = 100;

  RunMode mode = RunMode::kPfdm;
  DataConfig data;
  TrainingConfig local_training;
  TrainingConfig global_training;

  double delta = 1e-5;
  BoundMode bound_mode = BoundMode::kPerCoordinate;
  NormPolicy norm_policy;

  EvalConfig eval;
  std::uint64_t seed = 0;
  std::string transport = "in-process";  // or "file"
  std::filesystem::path output_dir = "pfdm-out";

  NoiseSchedule schedule() const;
  // Throws InvalidArgument on inconsistent values (t0 > T, missing files...).
  void Validate(bool check_paths = true) const;

  std::string ToYaml() const;
  static ExperimentConfig FromYaml(const std::string& text);
  static ExperimentConfig Load(const std::filesystem::path& path);
  // First 16 hex digits of SHA-256 over ToYaml() with output_dir cleared.
  std::string Hash() const;
};

// The desk-scale defaults: 8x8 MNIST, two majority/minority clients.
ExperimentConfig DefaultExperimentConfig();

struct PreparedData {
  SampleBatch pool;  // training pool the partition draws from
  SampleBatch test;  // held-out real data
  Partition partition;
  int num_classes = 0;
  NormReport norm;
};

PreparedData PrepareData(const ExperimentConfig& config);

// Per-client denoisers for the run mode. kPfdm: `personal` holds the secret
// local denoisers and `shared` the global one. kNonCollaborative: `personal`
// holds each client's full-T model. kNonPrivate: only `shared` (pooled).
struct TrainedModels {
  RunMode mode = RunMode::kPfdm;
  std::map<std::uint32_t, std::shared_ptr<Denoiser>> personal;
  std::shared_ptr<Denoiser> shared;
  SampleShape shape;
  std::size_t audit_messages = 0;
  std::vector<std::filesystem::path> checkpoints;
};

// Trains (or, when `checkpoint_dir` holds checkpoints stamped with this
// config's hash, reloads) the models for `config.mode`. Trained parameters are
// passed through the f32 checkpoint encoding so that in-memory and reloaded
// models are identical.
TrainedModels TrainModels(const ExperimentConfig& config,
                          const PreparedData& data,
                          const std::filesystem::path& checkpoint_dir = {});

// Reloads models written by TrainModels; throws with the producing stage named
// when a checkpoint is missing.
TrainedModels LoadModels(const ExperimentConfig& config,
                         const std::filesystem::path& checkpoint_dir);

// Conditional generation for one client. For kPfdm, t0 == 0 returns the
// global-only samples.
SampleBatch GenerateForClient(const ExperimentConfig& config,
                              const TrainedModels& models,
                              std::uint32_t client_id,
                              const std::vector<int>& labels,
                              std::uint64_t seed,
                              std::optional<int> t0_override = std::nullopt);

// Labels 0..num_classes-1 repeated `per_class` times, class-major.
std::vector<int> BalancedLabels(int num_classes, Index per_class);

struct ClientEvaluation {
  MetricReport agreement;            // per-class classifier agreement
  MetricReport downstream;           // accuracy of classifiers trained on samples
  double minority_mmd = 0.0;         // samples vs real, minority cluster
  double majority_mmd = 0.0;
  std::set<int> minority_classes;
};

ConvClassifier TrainReferenceClassifier(const ExperimentConfig& config,
                                        const PreparedData& data);

ClientEvaluation EvaluateClient(const ExperimentConfig& config,
                                const PreparedData& data,
                                const ConvClassifier& reference,
                                const SampleBatch& samples);

struct RunSummary {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> sample_files;
  std::optional<ClientEvaluation> evaluation;
  PrivacyReport privacy;
};

// End-to-end: data, training, per-client sampling, evaluation, reports.
// Every artifact carries the config hash and seed.
RunSummary RunExperiment(const ExperimentConfig& config, bool evaluate = true);

// Text stamp "config_hash=<h> seed=<s> stage=<stage>".
std::string ArtifactStamp(const ExperimentConfig& config,
                          const std::string& stage);

}  // namespace pfdm

#endif  // PFDM_EXPERIMENT_H_
