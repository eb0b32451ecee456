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


#ifndef PFDM_TRAINING_CONFIG_H_
#define PFDM_TRAINING_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

namespace pfdm {

enum class OptimizerKind { kSgd, kMomentum, kAdam };
enum class TimeEmbedding { kSinusoidal, kLearned };

std::string ToString(OptimizerKind kind);
OptimizerKind ParseOptimizerKind(const std::string& text);
std::string ToString(TimeEmbedding kind);
TimeEmbedding ParseTimeEmbedding(const std::string& text);

// Hyperparameters for one denoiser: the optimisation loop and the shape of
// the default conditional MLP.
struct TrainingConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int steps = 1000;
  std::uint64_t seed = 0;

  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double grad_clip_norm = 0.0;

  bool label_conditioning = false;
  TimeEmbedding time_embedding = TimeEmbedding::kSinusoidal;
  int time_embedding_dim = 32;
  std::vector<int> hidden_widths = {128, 128};

  // Throws InvalidArgument on non-positive counts or learning rate.
  void Validate() const;
};

}  // namespace pfdm

#endif  // PFDM_TRAINING_CONFIG_H_
