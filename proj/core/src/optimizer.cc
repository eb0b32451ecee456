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


#include "pfdm/optimizer.h"

#include <cmath>

#include "pfdm/errors.h"

namespace pfdm {

std::string ToString(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kMomentum:
      return "momentum";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "?";
}

OptimizerKind ParseOptimizerKind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "momentum") return OptimizerKind::kMomentum;
  if (text == "adam") return OptimizerKind::kAdam;
  throw InvalidArgument("unknown optimizer '" + text + "'");
}

std::string ToString(TimeEmbedding kind) {
  return kind == TimeEmbedding::kSinusoidal ? "sinusoidal" : "learned";
}

TimeEmbedding ParseTimeEmbedding(const std::string& text) {
  if (text == "sinusoidal") return TimeEmbedding::kSinusoidal;
  if (text == "learned") return TimeEmbedding::kLearned;
  throw InvalidArgument("unknown time embedding '" + text + "'");
}

void TrainingConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    throw InvalidArgument("training: learning rate must be > 0");
  }
  if (batch_size < 1 || steps < 1) {
    throw InvalidArgument("training: batch size and steps must be >= 1");
  }
  if (time_embedding_dim < 2 || time_embedding_dim % 2 != 0) {
    throw InvalidArgument("training: time embedding dim must be even, >= 2");
  }
  if (hidden_widths.empty()) {
    throw InvalidArgument("training: need at least one hidden layer");
  }
  for (int w : hidden_widths) {
    if (w < 1) throw InvalidArgument("training: hidden widths must be >= 1");
  }
  if (grad_clip_norm < 0.0) {
    throw InvalidArgument("training: grad_clip_norm must be >= 0");
  }
}

namespace {

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void Step(std::span<double> params, std::span<const double> grad) override {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
  }

 private:
  double lr_;
};

class Momentum final : public Optimizer {
 public:
  Momentum(double lr, double mu) : lr_(lr), mu_(mu) {}
  void Step(std::span<double> params, std::span<const double> grad) override {
    if (velocity_.empty()) velocity_.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity_[i] = mu_ * velocity_[i] + grad[i];
      params[i] -= lr_ * velocity_[i];
    }
  }

 private:
  double lr_;
  double mu_;
  std::vector<double> velocity_;
};

class Adam final : public Optimizer {
 public:
  Adam(double lr, double b1, double b2, double eps)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}
  void Step(std::span<double> params, std::span<const double> grad) override {
    if (m_.empty()) {
      m_.assign(params.size(), 0.0);
      v_.assign(params.size(), 0.0);
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace

std::unique_ptr<Optimizer> MakeOptimizer(const TrainingConfig& config) {
  switch (config.optimizer) {
    case OptimizerKind::kSgd:
      return std::make_unique<Sgd>(config.learning_rate);
    case OptimizerKind::kMomentum:
      return std::make_unique<Momentum>(config.learning_rate, config.momentum);
    case OptimizerKind::kAdam:
      return std::make_unique<Adam>(config.learning_rate, config.adam_beta1,
                                    config.adam_beta2, config.adam_epsilon);
  }
  throw InvalidArgument("unknown optimizer");
}

double ClipGradientNorm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace pfdm
