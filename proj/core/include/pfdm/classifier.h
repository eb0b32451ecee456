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


#ifndef PFDM_CLASSIFIER_H_
#define PFDM_CLASSIFIER_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pfdm/sample_batch.h"
#include "pfdm/training_config.h"

namespace pfdm {

struct ClassifierConfig {
  int num_classes = 10;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int hidden = 64;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
};

// Small CNN: conv3x3 -> ReLU -> conv3x3 -> ReLU -> maxpool2 -> fc -> ReLU ->
// fc -> softmax. Input is C x H x W with even H and W.
class ConvClassifier {
 public:
  ConvClassifier(const SampleShape& shape, const ClassifierConfig& config);

  // Mean cross-entropy over rows; overwrites `grad`.
  double LossAndGradient(const Matrix& x, std::span<const int> labels,
                         std::span<double> grad) const;
  Matrix Logits(const Matrix& x) const;
  std::vector<int> Predict(const Matrix& x) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  Index num_parameters() const { return static_cast<Index>(params_.size()); }

  // Minibatch training over `train`; labels must be in [0, num_classes).
  void Fit(const SampleBatch& train);

 private:
  struct Geometry;
  struct Cache;
  void Forward(const Matrix& x, Cache& cache) const;

  ClassifierConfig config_;
  std::shared_ptr<const Geometry> geo_;
  std::vector<double> params_;
};

double Accuracy(const ConvClassifier& classifier, const SampleBatch& test);

}  // namespace pfdm

#endif  // PFDM_CLASSIFIER_H_
