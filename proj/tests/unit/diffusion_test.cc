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

#include <cmath>

#include "gtest/gtest.h"
#include "pfdm/errors.h"
#include "pfdm/mlp_denoiser.h"
#include "pfdm/oracle_denoiser.h"
#include "pfdm/rng.h"

namespace pfdm {
namespace {

// Returns a fixed matrix regardless of input.
class ConstantDenoiser final : public Denoiser {
 public:
  explicit ConstantDenoiser(Matrix out) : out_(std::move(out)) {}
  Matrix Predict(const Matrix&, std::span<const int>,
                 std::span<const int>) const override {
    return out_;
  }
  std::string kind() const override { return "constant"; }

 private:
  Matrix out_;
};

NoiseSchedule Standard() { return MakeLinearSchedule(1000, 1e-4, 0.02); }

TEST(DiffuseTest, ZeroNoiseScalesSignal) {
  const auto s = Standard();
  SampleBatch x0(Matrix::Constant(3, 2, 2.0), {}, std::vector<int>{1, 2, 3}, 4u);
  const auto out = Diffuse(x0, 400, Matrix::Zero(3, 2), s);
  EXPECT_TRUE(out.data().isApprox(std::sqrt(s.alpha_bar(400)) * x0.data()));
  EXPECT_EQ(out.labels(), x0.labels());
  EXPECT_EQ(out.client_id(), x0.client_id());
}

TEST(DiffuseTest, ZeroSignalScalesNoise) {
  const auto s = Standard();
  RngStream rng(0, "z");
  const Matrix z = rng.NormalMatrix(4, 3);
  const auto out = Diffuse(SampleBatch(Matrix::Zero(4, 3)), 100, z, s);
  EXPECT_TRUE(out.data().isApprox(std::sqrt(1 - s.alpha_bar(100)) * z));
}

TEST(DiffuseTest, MonteCarloVarianceMatchesSchedule) {
  const auto s = Standard();
  RngStream rng(1, "mc");
  const int t = 250;
  const Matrix x0 = Matrix::Constant(100000, 1, 0.7);
  const auto out = Diffuse(SampleBatch(x0), t, rng.NormalMatrix(100000, 1), s);
  const Vector resid = out.data().col(0).array() - std::sqrt(s.alpha_bar(t)) * 0.7;
  const double var = resid.squaredNorm() / resid.size();
  EXPECT_NEAR(var / (1 - s.alpha_bar(t)), 1.0, 0.02);
}

TEST(DiffuseTest, AffineInInputs) {
  const auto s = Standard();
  RngStream rng(2, "a");
  const Matrix x = rng.NormalMatrix(5, 3), z = rng.NormalMatrix(5, 3);
  const auto base = Diffuse(SampleBatch(x), 77, z, s);
  const auto scaled = Diffuse(SampleBatch(2.5 * x), 77, 2.5 * z, s);
  EXPECT_TRUE(scaled.data().isApprox(2.5 * base.data(), 1e-14));
}

TEST(DiffuseTest, RejectsBadArguments) {
  const auto s = Standard();
  SampleBatch x(Matrix::Zero(2, 2));
  EXPECT_THROW(Diffuse(x, 0, Matrix::Zero(2, 2), s), InvalidArgument);
  EXPECT_THROW(Diffuse(x, 1001, Matrix::Zero(2, 2), s), InvalidArgument);
  EXPECT_THROW(Diffuse(x, 5, Matrix::Zero(2, 3), s), InvalidArgument);
}

TEST(DdpmLossTest, PerfectPredictorHasZeroLoss) {
  const auto s = Standard();
  RngStream rng(3, "l");
  const Matrix z = rng.NormalMatrix(6, 4);
  ConstantDenoiser perfect(z);
  EXPECT_DOUBLE_EQ(DdpmLoss(perfect, SampleBatch(rng.NormalMatrix(6, 4)), 10, z, s),
                   0.0);
}

TEST(DdpmLossTest, ZeroPredictorLossIsDimension) {
  const auto s = Standard();
  RngStream rng(4, "l");
  const int d = 4;
  const Matrix z = rng.NormalMatrix(100000, d);
  ZeroDenoiser zero;
  const double loss = DdpmLoss(zero, SampleBatch(Matrix::Zero(100000, d)), 10, z, s);
  EXPECT_NEAR(loss, d, 0.05);
}

TEST(DdpmLossTest, DuplicatedBatchKeepsLoss) {
  const auto s = Standard();
  Matrix x(1, 2), z(1, 2);
  x << 0.3, -0.1;
  z << 1.0, 2.0;
  ZeroDenoiser zero;
  Matrix x2(2, 2), z2(2, 2);
  x2 << x, x;
  z2 << z, z;
  EXPECT_DOUBLE_EQ(DdpmLoss(zero, SampleBatch(x), 5, z, s),
                   DdpmLoss(zero, SampleBatch(x2), 5, z2, s));
}

TEST(DdpmLossTest, OracleBeatsZeroAtEveryProbedStep) {
  const auto s = Standard();
  Vector mu(2);
  mu << 1.0, -1.0;
  OracleDenoiser oracle(GaussianMixtureSpec::Single(mu, 0.25), s);
  ZeroDenoiser zero;
  RngStream rng(5, "o");
  for (int t : {1, 10, 100, 500, 1000}) {
    Matrix x0 = 0.5 * rng.NormalMatrix(4000, 2);
    x0.rowwise() += mu.transpose();
    const Matrix z = rng.NormalMatrix(4000, 2);
    EXPECT_LE(DdpmLoss(oracle, SampleBatch(x0), t, z, s),
              DdpmLoss(zero, SampleBatch(x0), t, z, s))
        << t;
  }
}

TEST(ReverseStepTest, ZeroPredictionIsPureRescale) {
  const auto s = Standard();
  Matrix x(1, 2);
  x << 1.0, -2.0;
  ZeroDenoiser zero;
  const auto out = ReverseStep(SampleBatch(x), 1, zero, s, Matrix());
  EXPECT_TRUE(out.data().isApprox(x / std::sqrt(1 - s.beta(1))));
}

TEST(ReverseStepTest, HandComputedTwoVector) {
  const auto s = Standard();
  const int t = 300;
  Matrix x0(1, 2), zs(1, 2), noise(1, 2);
  x0 << 0.4, -0.2;
  zs << 1.5, 0.5;
  noise << -0.3, 0.8;
  const double a = s.alpha_bar(t), b = s.beta(t);
  const Matrix xt = std::sqrt(a) * x0 + std::sqrt(1 - a) * zs;
  ConstantDenoiser exact(zs);
  const auto out = ReverseStep(SampleBatch(xt), t, exact, s, noise);
  for (int j = 0; j < 2; ++j) {
    const double expected =
        (xt(0, j) - b / std::sqrt(1 - a) * zs(0, j)) / std::sqrt(1 - b) +
        std::sqrt(b) * noise(0, j);
    EXPECT_NEAR(out.data()(0, j), expected, 1e-14);
  }
  const auto literal = ReverseStep(SampleBatch(xt), t, exact, s, noise,
                                   ReverseCoefficient::kOneMinusBeta);
  EXPECT_NEAR(literal.data()(0, 0),
              (xt(0, 0) - b / std::sqrt(1 - a) * zs(0, 0)) / (1 - b) +
                  std::sqrt(b) * noise(0, 0),
              1e-14);
}

TEST(ReverseStepTest, RejectsNoiseAtFinalStep) {
  const auto s = Standard();
  ZeroDenoiser zero;
  SampleBatch x(Matrix::Zero(1, 2));
  EXPECT_THROW(ReverseStep(x, 1, zero, s, Matrix::Ones(1, 2)), InvalidArgument);
  EXPECT_NO_THROW(ReverseStep(x, 1, zero, s, Matrix::Zero(1, 2)));
}

TEST(ReverseStepTest, PreservesShapeAndLabels) {
  const auto s = Standard();
  ZeroDenoiser zero;
  SampleBatch x(Matrix::Zero(2, 4), {1, 2, 2}, std::vector<int>{0, 1}, 3u);
  const auto out = ReverseStep(x, 5, zero, s, Matrix::Zero(2, 4));
  EXPECT_EQ(out.shape(), x.shape());
  EXPECT_EQ(out.labels(), x.labels());
}

TEST(SampleDdpmTest, SameSeedIsBitIdentical) {
  const auto s = MakeLinearSchedule(50, 1e-3, 0.1);
  Vector mu = Vector::Zero(3);
  OracleDenoiser oracle(GaussianMixtureSpec::Single(mu, 1.0), s);
  const auto a = SampleDdpm(oracle, s, 50, 20, {3}, {}, 9);
  const auto b = SampleDdpm(oracle, s, 50, 20, {3}, {}, 9);
  EXPECT_EQ(a.data(), b.data());
  const auto c = SampleDdpm(oracle, s, 50, 20, {3}, {}, 10);
  EXPECT_NE(a.data(), c.data());
}

TEST(SampleDdpmTest, SingleSampleHasShape) {
  const auto s = MakeLinearSchedule(10, 1e-3, 0.1);
  ZeroDenoiser zero;
  const auto out = SampleDdpm(zero, s, 10, 1, {1, 2, 2}, {}, 0);
  EXPECT_EQ(out.count(), 1);
  EXPECT_EQ(out.shape(), (SampleShape{1, 2, 2}));
}

TEST(SampleDdpmTest, ObserverSeesEveryStep) {
  const auto s = MakeLinearSchedule(30, 1e-3, 0.1);
  ZeroDenoiser zero;
  std::vector<int> seen;
  SamplingOptions opts;
  opts.observer = [&](int t, const SampleBatch&) { seen.push_back(t); };
  SampleDdpm(zero, s, 30, 2, {1}, {}, 0, opts);
  ASSERT_EQ(seen.size(), 30u);
  EXPECT_EQ(seen.front(), 29);
  EXPECT_EQ(seen.back(), 0);
}

TEST(SampleDdpmTest, OracleReproducesGaussianMoments) {
  // T = 200 with the betas scaled so that alpha_bar_T stays near zero.
  const auto s = MakeLinearSchedule(200, 5e-4, 0.1);
  Vector mu(2);
  mu << 1.0, -2.0;
  const double sd = 0.5;
  OracleDenoiser oracle(GaussianMixtureSpec::Single(mu, sd * sd), s);
  const auto out = SampleDdpm(oracle, s, 200, 10000, {2}, {}, 123);
  const RowVector mean = out.data().colwise().mean();
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(mean(j), mu(j), 0.05 * sd);
    const double var =
        (out.data().col(j).array() - mean(j)).square().sum() / out.count();
    EXPECT_NEAR(var / (sd * sd), 1.0, 0.10);
  }
}

TEST(TrainDdpmTest, NonTrainableDenoiserIsEvaluatedOnly) {
  const auto s = MakeLinearSchedule(20, 1e-3, 0.1);
  ZeroDenoiser zero;
  TrainingConfig cfg;
  cfg.steps = 5;
  cfg.batch_size = 4;
  RngStream rng(0, "d");
  const auto trace = TrainDdpm(SampleBatch(rng.NormalMatrix(8, 2)), 20, s, zero, cfg);
  EXPECT_EQ(trace.step_loss.size(), 5u);
}

TEST(TrainDdpmTest, TMaxOneUsesOnlyStepOne) {
  const auto s = MakeLinearSchedule(20, 1e-3, 0.1);
  TrainingConfig cfg;
  cfg.steps = 20;
  cfg.batch_size = 4;
  cfg.hidden_widths = {8};
  cfg.time_embedding_dim = 4;
  auto net = BuildTrainableDenoiser(cfg, {2}, 0, 20);
  RngStream rng(0, "d");
  const auto trace = TrainDdpm(SampleBatch(rng.NormalMatrix(16, 2)), 1, s, *net, cfg);
  for (std::size_t i = 0; i < trace.step_loss.size(); ++i) {
    EXPECT_EQ(trace.step_min_t[i], 1);
    EXPECT_EQ(trace.step_max_t[i], 1);
  }
}

TEST(TrainDdpmTest, LossDecreasesOnGaussianToy) {
  const auto s = MakeLinearSchedule(100, 1e-3, 0.05);
  TrainingConfig cfg;
  cfg.steps = 2000;
  cfg.batch_size = 32;
  cfg.learning_rate = 2e-3;
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.hidden_widths = {32, 32};
  cfg.time_embedding_dim = 8;
  auto net = BuildTrainableDenoiser(cfg, {2}, 0, 100);
  RngStream rng(0, "toy");
  Matrix x = 0.3 * rng.NormalMatrix(512, 2);
  x.col(0).array() += 1.0;
  const auto trace = TrainDdpm(SampleBatch(x), 100, s, *net, cfg);
  ASSERT_GE(trace.epoch_mean_loss.size(), 2u);
  EXPECT_LT(trace.epoch_mean_loss.back(), trace.epoch_mean_loss.front());
}

TEST(TrainDdpmTest, DeterministicGivenSeed) {
  const auto s = MakeLinearSchedule(50, 1e-3, 0.05);
  TrainingConfig cfg;
  cfg.steps = 50;
  cfg.batch_size = 8;
  cfg.hidden_widths = {8};
  cfg.time_embedding_dim = 4;
  RngStream rng(0, "d");
  const SampleBatch data(rng.NormalMatrix(32, 3));
  auto a = BuildTrainableDenoiser(cfg, {3}, 0, 50);
  auto b = BuildTrainableDenoiser(cfg, {3}, 0, 50);
  TrainDdpm(data, 50, s, *a, cfg);
  TrainDdpm(data, 50, s, *b, cfg);
  EXPECT_TRUE(std::equal(a->parameters().begin(), a->parameters().end(),
                         b->parameters().begin()));
}

TEST(TrainDdpmTest, RejectsEmptyDataAndBadRange) {
  const auto s = MakeLinearSchedule(10, 1e-3, 0.05);
  ZeroDenoiser zero;
  TrainingConfig cfg;
  EXPECT_THROW(TrainDdpm(SampleBatch(Matrix(0, 2)), 5, s, zero, cfg),
               InvalidArgument);
  EXPECT_THROW(TrainDdpm(SampleBatch(Matrix::Zero(4, 2)), 11, s, zero, cfg),
               InvalidArgument);
}

TEST(TrainDdpmTest, DivergenceIsReported) {
  const auto s = MakeLinearSchedule(10, 1e-3, 0.05);
  TrainingConfig cfg;
  cfg.steps = 200;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e6;
  cfg.hidden_widths = {8};
  cfg.time_embedding_dim = 4;
  auto net = BuildTrainableDenoiser(cfg, {2}, 0, 10);
  RngStream rng(0, "d");
  EXPECT_THROW(TrainDdpm(SampleBatch(100 * rng.NormalMatrix(8, 2)), 10, s, *net, cfg),
               TrainingDiverged);
}

}  // namespace
}  // namespace pfdm
