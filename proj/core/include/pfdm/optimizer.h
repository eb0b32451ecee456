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


#ifndef PFDM_OPTIMIZER_H_
#define PFDM_OPTIMIZER_H_

#include <memory>
#include <span>
#include <vector>

#include "pfdm/training_config.h"

namespace pfdm {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // params -= update(grad); sizes must match the first call.
  virtual void Step(std::span<double> params, std::span<const double> grad) = 0;
};

std::unique_ptr<Optimizer> MakeOptimizer(const TrainingConfig& config);

// Scales `grad` in place so its l2 norm is at most max_norm. Returns the norm
// before clipping.
double ClipGradientNorm(std::span<double> grad, double max_norm);

}  // namespace pfdm

#endif  // PFDM_OPTIMIZER_H_
