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


#include "pfdm/oracle_denoiser.h"

#include <cmath>
#include <numbers>
#include <numeric>

#include "pfdm/errors.h"

namespace pfdm {

void GaussianMixtureSpec::Validate() const {
  const Index k = means.rows();
  if (k < 1 || means.cols() < 1) {
    throw InvalidArgument("mixture: need at least one component of dim >= 1");
  }
  if (static_cast<Index>(weights.size()) != k ||
      static_cast<Index>(variances.size()) != k) {
    throw InvalidArgument("mixture: weights/variances/means disagree on K");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw InvalidArgument("mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("mixture: weights must sum to 1");
  }
  for (double v : variances) {
    if (!(v > 0.0)) throw InvalidArgument("mixture: variances must be positive");
  }
  if (!means.allFinite()) throw InvalidArgument("mixture: non-finite mean");
}

GaussianMixtureSpec GaussianMixtureSpec::Single(const Vector& mean,
                                                double variance) {
  GaussianMixtureSpec spec;
  spec.weights = {1.0};
  spec.means = mean.transpose();
  spec.variances = {variance};
  return spec;
}

GaussianMixtureSpec DiffuseMixture(const GaussianMixtureSpec& spec,
                                   const NoiseSchedule& schedule, int t) {
  spec.Validate();
  const double a = schedule.alpha_bar(t);
  GaussianMixtureSpec out = spec;
  out.means *= std::sqrt(a);
  for (double& v : out.variances) v = a * v + 1.0 - a;
  return out;
}

GaussianMixtureSpec CombineMixtures(
    const std::vector<GaussianMixtureSpec>& parts,
    const std::vector<double>& outer_weights) {
  if (parts.empty() || parts.size() != outer_weights.size()) {
    throw InvalidArgument("CombineMixtures: one weight per part required");
  }
  const double total =
      std::accumulate(outer_weights.begin(), outer_weights.end(), 0.0);
  Index rows = 0;
  for (const auto& p : parts) {
    p.Validate();
    if (p.dim() != parts.front().dim()) {
      throw InvalidArgument("CombineMixtures: dimension mismatch");
    }
    rows += p.components();
  }
  GaussianMixtureSpec out;
  out.means.resize(rows, parts.front().dim());
  Index r = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!(outer_weights[i] > 0.0)) {
      throw InvalidArgument("CombineMixtures: weights must be positive");
    }
    for (Index k = 0; k < parts[i].components(); ++k) {
      out.weights.push_back(outer_weights[i] / total *
                            parts[i].weights[static_cast<std::size_t>(k)]);
      out.variances.push_back(parts[i].variances[static_cast<std::size_t>(k)]);
      out.means.row(r++) = parts[i].means.row(k);
    }
  }
  // Re-normalise away rounding in the products.
  const double sum = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& w : out.weights) w /= sum;
  return out;
}

OracleDenoiser::OracleDenoiser(GaussianMixtureSpec spec, NoiseSchedule schedule)
    : spec_(std::move(spec)), schedule_(std::move(schedule)) {
  spec_.Validate();
}

namespace {

struct RowPosterior {
  Vector log_resp;  // normalised log responsibilities
  Vector mean;      // E[x0 | x_t]
};

RowPosterior PosteriorForRow(const GaussianMixtureSpec& spec,
                             const Eigen::Ref<const RowVector>& x, double a) {
  const Index k_count = spec.components();
  const double d = static_cast<double>(spec.dim());
  const double sa = std::sqrt(a);
  Vector log_w(k_count);
  for (Index k = 0; k < k_count; ++k) {
    const double s2 = spec.variances[static_cast<std::size_t>(k)];
    const double v = a * s2 + 1.0 - a;
    const double dist2 = (x - sa * spec.means.row(k)).squaredNorm();
    log_w(k) = std::log(spec.weights[static_cast<std::size_t>(k)]) -
               0.5 * d * std::log(2.0 * std::numbers::pi * v) -
               0.5 * dist2 / v;
  }
  const double top = log_w.maxCoeff();
  const double lse = top + std::log((log_w.array() - top).exp().sum());
  RowPosterior out;
  out.log_resp = log_w.array() - lse;
  out.mean = Vector::Zero(spec.dim());
  for (Index k = 0; k < k_count; ++k) {
    const double s2 = spec.variances[static_cast<std::size_t>(k)];
    const double v = a * s2 + 1.0 - a;
    const double gain = sa * s2 / v;
    const RowVector m =
        spec.means.row(k) + gain * (x - sa * spec.means.row(k));
    out.mean += std::exp(out.log_resp(k)) * m.transpose();
  }
  return out;
}

}  // namespace

Matrix OracleDenoiser::Predict(const Matrix& x_t, std::span<const int> steps,
                               std::span<const int>) const {
  if (x_t.cols() != spec_.dim()) {
    throw InvalidArgument("oracle: input width does not match mixture dim");
  }
  if (static_cast<Index>(steps.size()) != x_t.rows()) {
    throw InvalidArgument("oracle: need one step per row");
  }
  Matrix out(x_t.rows(), x_t.cols());
  for (Index i = 0; i < x_t.rows(); ++i) {
    const double a = schedule_.alpha_bar(steps[static_cast<std::size_t>(i)]);
    const RowPosterior post = PosteriorForRow(spec_, x_t.row(i), a);
    out.row(i) = (x_t.row(i) - std::sqrt(a) * post.mean.transpose()) /
                 std::sqrt(1.0 - a);
  }
  return out;
}

Matrix OracleDenoiser::Responsibilities(const Matrix& x_t, int t) const {
  const double a = schedule_.alpha_bar(t);
  Matrix out(x_t.rows(), spec_.components());
  for (Index i = 0; i < x_t.rows(); ++i) {
    out.row(i) = PosteriorForRow(spec_, x_t.row(i), a)
                     .log_resp.array()
                     .exp()
                     .transpose();
  }
  return out;
}

Matrix OracleDenoiser::PosteriorMean(const Matrix& x_t, int t) const {
  const double a = schedule_.alpha_bar(t);
  Matrix out(x_t.rows(), x_t.cols());
  for (Index i = 0; i < x_t.rows(); ++i) {
    out.row(i) = PosteriorForRow(spec_, x_t.row(i), a).mean.transpose();
  }
  return out;
}

}  // namespace pfdm
