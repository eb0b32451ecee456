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


#ifndef PFDM_ORACLE_DENOISER_H_
#define PFDM_ORACLE_DENOISER_H_

#include <vector>

#include "pfdm/denoiser.h"
#include "pfdm/schedule.h"
#include "pfdm/tensor.h"

namespace pfdm {

// Isotropic Gaussian mixture sum_k w_k N(mu_k, s_k^2 I).
struct GaussianMixtureSpec {
  std::vector<double> weights;
  Matrix means;                  // K x d
  std::vector<double> variances;  // s_k^2

  Index components() const { return means.rows(); }
  Index dim() const { return means.cols(); }

  // Weights positive and summing to 1 within 1e-12, variances positive.
  void Validate() const;

  static GaussianMixtureSpec Single(const Vector& mean, double variance);
};

// Law of x_t when x_0 follows `spec`: each component becomes
// N(sqrt(a) mu_k, (a s_k^2 + 1 - a) I) with a = abar_t.
GaussianMixtureSpec DiffuseMixture(const GaussianMixtureSpec& spec,
                                   const NoiseSchedule& schedule, int t);

// Mixture of several mixtures with the given outer weights (renormalised).
GaussianMixtureSpec CombineMixtures(
    const std::vector<GaussianMixtureSpec>& parts,
    const std::vector<double>& outer_weights);

// Exact minimum-squared-error noise predictor for data drawn from a Gaussian
// mixture: z*(x_t, t) = (x_t - sqrt(a) E[x_0 | x_t]) / sqrt(1 - a).
// Labels are accepted and ignored.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(GaussianMixtureSpec spec, NoiseSchedule schedule);

  Matrix Predict(const Matrix& x_t, std::span<const int> steps,
                 std::span<const int> labels) const override;
  std::string kind() const override { return "oracle"; }

  // Posterior component probabilities for each row of x_t (rows sum to 1).
  Matrix Responsibilities(const Matrix& x_t, int t) const;
  // E[x_0 | x_t] for each row.
  Matrix PosteriorMean(const Matrix& x_t, int t) const;

  const GaussianMixtureSpec& spec() const { return spec_; }

 private:
  GaussianMixtureSpec spec_;
  NoiseSchedule schedule_;
};

}  // namespace pfdm

#endif  // PFDM_ORACLE_DENOISER_H_
