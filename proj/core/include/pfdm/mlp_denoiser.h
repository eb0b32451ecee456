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


#ifndef PFDM_MLP_DENOISER_H_
#define PFDM_MLP_DENOISER_H_

#include <memory>
#include <vector>

#include "pfdm/checkpoint.h"
#include "pfdm/denoiser.h"
#include "pfdm/sample_batch.h"
#include "pfdm/training_config.h"

namespace pfdm {

struct MlpArchitecture {
  Index input_dim = 0;
  SampleShape shape;
  int num_labels = 0;  // 0 disables label conditioning
  int num_steps = 1;   // T, used to scale t into (0, 1]
  TimeEmbedding time_embedding = TimeEmbedding::kSinusoidal;
  int time_embedding_dim = 32;
  std::vector<int> hidden_widths;
};

// Conditional MLP noise predictor. Every hidden layer receives the time
// embedding through its own projection; the label embedding is added to the
// first hidden pre-activation. SiLU activations, linear output.
class MlpDenoiser final : public TrainableDenoiser {
 public:
  // Parameters drawn deterministically from `seed`.
  MlpDenoiser(MlpArchitecture arch, std::uint64_t seed);

  Matrix Predict(const Matrix& x_t, std::span<const int> steps,
                 std::span<const int> labels) const override;
  std::string kind() const override { return "mlp"; }

  Index num_parameters() const override {
    return static_cast<Index>(params_.size());
  }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

  double LossAndGradient(const Matrix& x_t, std::span<const int> steps,
                         std::span<const int> labels, const Matrix& target,
                         std::span<double> grad) const override;

  std::unique_ptr<TrainableDenoiser> Clone() const override;

  const MlpArchitecture& architecture() const { return arch_; }

  Checkpoint ToCheckpoint() const;
  static std::unique_ptr<MlpDenoiser> FromCheckpoint(const Checkpoint& ckpt);

  // Time features for each step (rows).
  Matrix TimeFeatures(std::span<const int> steps) const;

 private:
  struct Layout;
  struct Cache;

  MlpDenoiser(MlpArchitecture arch, std::vector<double> params);
  void BuildLayout();
  void Forward(const Matrix& x, std::span<const int> steps,
               std::span<const int> labels, Cache& cache) const;

  MlpArchitecture arch_;
  std::vector<double> params_;
  std::shared_ptr<const Layout> layout_;
};

// Validates shape/label consistency against `config` and builds the default
// network for samples of `shape`. `num_labels` is ignored unless
// config.label_conditioning is set.
std::unique_ptr<MlpDenoiser> BuildTrainableDenoiser(const TrainingConfig& config,
                                                    const SampleShape& shape,
                                                    int num_labels,
                                                    int num_steps);

}  // namespace pfdm

#endif  // PFDM_MLP_DENOISER_H_
