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


#include "pfdm/diffusion.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pfdm/errors.h"
#include "pfdm/optimizer.h"

namespace pfdm {
namespace {

void CheckStep(int t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T()) {
    throw InvalidArgument("step " + std::to_string(t) + " outside [1, " +
                          std::to_string(schedule.T()) + "]");
  }
}

void CheckNoiseShape(const Matrix& z, const SampleBatch& x) {
  if (z.rows() != x.count() || z.cols() != x.dim()) {
    throw InvalidArgument("noise shape (" + std::to_string(z.rows()) + "x" +
                          std::to_string(z.cols()) + ") != sample shape (" +
                          std::to_string(x.count()) + "x" +
                          std::to_string(x.dim()) + ")");
  }
}

}  // namespace

SampleBatch Diffuse(const SampleBatch& x0, int t, const Matrix& z,
                    const NoiseSchedule& schedule) {
  CheckStep(t, schedule);
  CheckNoiseShape(z, x0);
  const double abar = schedule.alpha_bar(t);
  return x0.WithData(std::sqrt(abar) * x0.data() + std::sqrt(1.0 - abar) * z);
}

double DdpmLoss(const Denoiser& denoiser, const SampleBatch& x0, int t,
                const Matrix& z, const NoiseSchedule& schedule) {
  const SampleBatch x_t = Diffuse(x0, t, z, schedule);
  const Matrix predicted = denoiser.PredictAt(x_t.data(), t, x0.label_span());
  return (z - predicted).rowwise().squaredNorm().mean();
}

TrainingTrace TrainDdpm(const SampleBatch& dataset, int t_max,
                        const NoiseSchedule& schedule, Denoiser& denoiser,
                        const TrainingConfig& config) {
  dataset.Validate();
  CheckStep(t_max, schedule);
  config.Validate();

  RngStream order_rng(config.seed, "train/order");
  RngStream step_rng(config.seed, "train/steps");
  RngStream noise_rng(config.seed, "train/noise");

  auto* trainable = dynamic_cast<TrainableDenoiser*>(&denoiser);
  std::unique_ptr<Optimizer> optimizer;
  std::vector<double> grad;
  if (trainable) {
    optimizer = MakeOptimizer(config);
    grad.resize(static_cast<std::size_t>(trainable->num_parameters()));
  }

  const Index n = dataset.count();
  const Index batch = std::min<Index>(config.batch_size, n);
  std::vector<Index> order = order_rng.SampleWithoutReplacement(n, n);
  Index cursor = 0;
  double epoch_sum = 0.0;
  int epoch_steps = 0;

  std::vector<int> steps(static_cast<std::size_t>(batch));
  std::vector<double> sqrt_abar(static_cast<std::size_t>(batch));
  std::vector<double> sqrt_one_minus(static_cast<std::size_t>(batch));
  std::vector<int> labels;

  TrainingTrace trace;
  trace.step_loss.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 0; step < config.steps; ++step) {
    if (cursor + batch > n) {
      trace.epoch_mean_loss.push_back(epoch_sum / epoch_steps);
      epoch_sum = 0.0;
      epoch_steps = 0;
      order = order_rng.SampleWithoutReplacement(n, n);
      cursor = 0;
    }
    const std::span<const Index> rows(order.data() + cursor,
                                      static_cast<std::size_t>(batch));
    cursor += batch;

    Matrix x(batch, dataset.dim());
    labels.clear();
    int t_lo = t_max, t_hi = 1;
    for (Index i = 0; i < batch; ++i) {
      x.row(i) = dataset.data().row(rows[i]);
      if (dataset.has_labels()) {
        labels.push_back((*dataset.labels())[static_cast<std::size_t>(rows[i])]);
      }
      const int t = static_cast<int>(step_rng.UniformInt(1, t_max));
      steps[i] = t;
      t_lo = std::min(t_lo, t);
      t_hi = std::max(t_hi, t);
      const double abar = schedule.alpha_bar(t);
      sqrt_abar[i] = std::sqrt(abar);
      sqrt_one_minus[i] = std::sqrt(1.0 - abar);
    }
    const Matrix z = noise_rng.NormalMatrix(batch, dataset.dim());
    for (Index i = 0; i < batch; ++i) {
      x.row(i) = sqrt_abar[i] * x.row(i) + sqrt_one_minus[i] * z.row(i);
    }

    double loss;
    if (trainable) {
      loss = trainable->LossAndGradient(x, steps, labels, z, grad);
      if (std::isfinite(loss)) {
        if (config.grad_clip_norm > 0.0) {
          ClipGradientNorm(grad, config.grad_clip_norm);
        }
        optimizer->Step(trainable->parameters(), grad);
      }
    } else {
      loss = (z - denoiser.Predict(x, steps, labels)).rowwise().squaredNorm()
                 .mean();
    }
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training diverged: non-finite loss at step " << step
          << " (t in [" << t_lo << ", " << t_hi << "], lr "
          << config.learning_rate << ")";
      throw TrainingDiverged(msg.str());
    }
    trace.step_loss.push_back(loss);
    trace.step_min_t.push_back(t_lo);
    trace.step_max_t.push_back(t_hi);
    epoch_sum += loss;
    ++epoch_steps;
  }
  if (epoch_steps > 0) trace.epoch_mean_loss.push_back(epoch_sum / epoch_steps);
  return trace;
}

SampleBatch ReverseStep(const SampleBatch& x_t, int t, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, const Matrix& z,
                        ReverseCoefficient coefficient) {
  CheckStep(t, schedule);
  const bool has_noise = z.size() != 0;
  if (has_noise) {
    CheckNoiseShape(z, x_t);
    if (t == 1 && !z.isZero(0.0)) {
      throw InvalidArgument("reverse step at t = 1 must not add noise");
    }
  }
  const double beta = schedule.beta(t);
  const double abar = schedule.alpha_bar(t);
  const double scale = coefficient == ReverseCoefficient::kSqrtOneMinusBeta
                           ? 1.0 / std::sqrt(1.0 - beta)
                           : 1.0 / (1.0 - beta);
  const Matrix predicted = denoiser.PredictAt(x_t.data(), t, x_t.label_span());
  Matrix next = scale * (x_t.data() - (beta / std::sqrt(1.0 - abar)) * predicted);
  if (has_noise && t > 1) next += schedule.sigma(t) * z;
  return x_t.WithData(std::move(next));
}

SampleBatch RunReverseChain(SampleBatch start, int t_start,
                            const Denoiser& denoiser,
                            const NoiseSchedule& schedule, RngStream& rng,
                            const SamplingOptions& options) {
  if (t_start < 0 || t_start > schedule.T()) {
    throw InvalidArgument("reverse chain start outside [0, T]");
  }
  SampleBatch x = std::move(start);
  const Matrix no_noise;
  for (int t = t_start; t >= 1; --t) {
    if (t > 1) {
      const Matrix z = rng.NormalMatrix(x.count(), x.dim());
      x = ReverseStep(x, t, denoiser, schedule, z, options.coefficient);
    } else {
      x = ReverseStep(x, t, denoiser, schedule, no_noise, options.coefficient);
    }
    if (options.observer) options.observer(t - 1, x);
  }
  return x;
}

SampleBatch SampleDdpm(const Denoiser& denoiser, const NoiseSchedule& schedule,
                       int t_start, Index count, const SampleShape& shape,
                       std::span<const int> labels, std::uint64_t seed,
                       const SamplingOptions& options) {
  if (count < 1) throw InvalidArgument("SampleDdpm: count must be >= 1");
  if (!labels.empty() && static_cast<Index>(labels.size()) != count) {
    throw InvalidArgument("SampleDdpm: need one label per sample");
  }
  RngStream rng(seed, "sample/ddpm");
  std::optional<std::vector<int>> label_vec;
  if (!labels.empty()) label_vec.emplace(labels.begin(), labels.end());
  SampleBatch start(rng.NormalMatrix(count, FlatSize(shape)), shape,
                    std::move(label_vec));
  return RunReverseChain(std::move(start), t_start, denoiser, schedule, rng,
                         options);
}

}  // namespace pfdm
