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


#ifndef PFDM_DENOISER_H_
#define PFDM_DENOISER_H_

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pfdm/tensor.h"

namespace pfdm {

// Noise-prediction function z(x_t, t, label). Rows of `x_t` are samples;
// `steps` holds one 1-based step per row and `labels` is either empty or one
// public class id per row. Implementations are deterministic and reentrant.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Matrix Predict(const Matrix& x_t, std::span<const int> steps,
                         std::span<const int> labels) const = 0;

  // Every row evaluated at the same step.
  Matrix PredictAt(const Matrix& x_t, int t,
                   std::span<const int> labels = {}) const;

  virtual bool trainable() const { return false; }
  virtual std::string kind() const = 0;
};

// A denoiser with a flat parameter vector and an analytic gradient of the
// simplified objective mean_rows ||target - Predict(x_t)||^2.
class TrainableDenoiser : public Denoiser {
 public:
  bool trainable() const override { return true; }

  virtual Index num_parameters() const = 0;
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  // Returns the loss and overwrites `grad` (size num_parameters()).
  virtual double LossAndGradient(const Matrix& x_t, std::span<const int> steps,
                                 std::span<const int> labels,
                                 const Matrix& target,
                                 std::span<double> grad) const = 0;

  virtual std::unique_ptr<TrainableDenoiser> Clone() const = 0;
};

// Predicts zero noise everywhere. Baseline for loss comparisons.
class ZeroDenoiser final : public Denoiser {
 public:
  Matrix Predict(const Matrix& x_t, std::span<const int> steps,
                 std::span<const int> labels) const override;
  std::string kind() const override { return "zero"; }
};

}  // namespace pfdm

#endif  // PFDM_DENOISER_H_
