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


#include "pfdm/denoiser.h"

#include <vector>

namespace pfdm {

Matrix Denoiser::PredictAt(const Matrix& x_t, int t,
                           std::span<const int> labels) const {
  const std::vector<int> steps(static_cast<std::size_t>(x_t.rows()), t);
  return Predict(x_t, steps, labels);
}

Matrix ZeroDenoiser::Predict(const Matrix& x_t, std::span<const int>,
                             std::span<const int>) const {
  return Matrix::Zero(x_t.rows(), x_t.cols());
}

}  // namespace pfdm
