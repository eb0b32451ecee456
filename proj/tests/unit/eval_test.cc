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


#include "pfdm/eval.h"

#include <sstream>

#include "gtest/gtest.h"
#include "pfdm/errors.h"
#include "pfdm/rng.h"

namespace pfdm {
namespace {

TEST(MomentDistanceTest, ClosedForm) {
  Matrix x(4, 2);
  x << 1, 0, 3, 0, 1, 2, 3, 2;
  // Mean (2, 1), biased variance (1, 1).
  Vector mu(2);
  mu << 0, 0;
  EXPECT_NEAR(GaussianMomentDistance(x, mu, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(GaussianMomentDistance(x, mu, 3.0), 5.0 + 2 * 4.0, 1e-12);
  mu << 2, 1;
  EXPECT_NEAR(GaussianMomentDistance(x, mu, 1.0), 0.0, 1e-12);
}

TEST(MmdTest, MedianPairwiseDistance) {
  Matrix x(3, 1);
  x << 0, 1, 3;
  EXPECT_DOUBLE_EQ(MedianPairwiseDistance(x), 2.0);
}

TEST(MmdTest, SeparatesDistributions) {
  RngStream rng(1, "mmd");
  const Matrix a = rng.NormalMatrix(300, 3);
  const Matrix b = rng.NormalMatrix(300, 3);
  Matrix c = rng.NormalMatrix(300, 3);
  c.array() += 1.5;
  const auto same = KernelMmd(a, b);
  const auto diff = KernelMmd(a, c);
  EXPECT_LT(std::abs(same.mmd2), 0.01);
  EXPECT_GT(diff.mmd2, 0.1);
  EXPECT_GT(same.bandwidth, 0.0);
  BandwidthPolicy fixed{BandwidthPolicy::Kind::kFixed, 2.0};
  EXPECT_DOUBLE_EQ(KernelMmd(a, c, fixed).bandwidth, 2.0);
}

TEST(MmdTest, IdenticalSamplesAndPermutation) {
  RngStream rng(2, "mmd");
  const Matrix a = rng.NormalMatrix(50, 2);
  BandwidthPolicy fixed{BandwidthPolicy::Kind::kFixed, 1.0};
  // Unbiased estimator of identical sets: cross term includes the diagonal.
  EXPECT_LT(std::abs(KernelMmd(a, a, fixed).mmd2), 0.05);
  const Matrix b = rng.NormalMatrix(60, 2).array() + 1.0;
  Matrix a_rev = a.colwise().reverse();
  EXPECT_NEAR(KernelMmd(a, b, fixed).mmd2, KernelMmd(a_rev, b, fixed).mmd2, 1e-12);
}

ClassifierConfig SmallClassifier() {
  ClassifierConfig c;
  c.num_classes = 2;
  c.conv1_channels = 4;
  c.conv2_channels = 4;
  c.hidden = 16;
  c.epochs = 6;
  c.batch_size = 16;
  return c;
}

// Class 0 lights the top half of a 4x4 image, class 1 the bottom half.
SampleBatch Halves(int n, std::uint64_t seed, bool shuffle_labels = false) {
  RngStream rng(seed, "halves");
  Matrix x = rng.NormalMatrix(n, 16) * 0.1;
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 2;
    for (int p = 0; p < 8; ++p) x(i, y[i] * 8 + p) += 1.0;
  }
  if (shuffle_labels) {
    for (int i = 0; i < n; ++i) y[i] = static_cast<int>(rng.UniformInt(0, 1));
  }
  return SampleBatch(x, {1, 4, 4}, y);
}

TEST(DownstreamTest, LearnsSeparableTaskAndReportsSpread) {
  DownstreamConfig cfg;
  cfg.classifier = SmallClassifier();
  const auto report = DownstreamAccuracy(Halves(200, 1), Halves(100, 2), cfg);
  EXPECT_GT(report.aggregate, 0.95);
  EXPECT_GE(report.aggregate_std, 0.0);
  EXPECT_EQ(report.per_class.size(), 2u);
  EXPECT_EQ(report.per_class_count.at(0), 50);
  EXPECT_EQ(report.sample_count, 200);  // synthetic training rows
}

TEST(DownstreamTest, ShuffledLabelsGiveChance) {
  DownstreamConfig cfg;
  cfg.classifier = SmallClassifier();
  const auto report =
      DownstreamAccuracy(Halves(200, 1, true), Halves(400, 2), cfg);
  EXPECT_NEAR(report.aggregate, 0.5, 0.12);
}

TEST(DownstreamTest, MissingClassIsAnError) {
  DownstreamConfig cfg;
  cfg.classifier = SmallClassifier();
  const SampleBatch train = Halves(40, 1);
  std::vector<int> zeros(40, 0);
  const SampleBatch only_zero(train.data(), train.shape(), zeros);
  EXPECT_THROW(DownstreamAccuracy(only_zero, Halves(20, 2), cfg), InvalidArgument);
}

TEST(PerClassReportTest, CountsAndUnweightedMean) {
  ConvClassifier clf({1, 4, 4}, SmallClassifier());
  clf.Fit(Halves(200, 3));
  // Three samples request label 0 and look like class 0; one requests label 1
  // but looks like class 0.
  SampleBatch look0 = Halves(8, 4);
  std::vector<Index> rows = {0, 2, 4, 6};
  SampleBatch picked = look0.Select(rows);
  const SampleBatch requested(picked.data(), picked.shape(), std::vector<int>{0, 0, 0, 1});
  const auto report = PerClassReport(requested, clf);
  EXPECT_EQ(report.per_class_count.at(0), 3);
  EXPECT_EQ(report.per_class_count.at(1), 1);
  EXPECT_DOUBLE_EQ(report.per_class.at(0), 1.0);
  EXPECT_DOUBLE_EQ(report.per_class.at(1), 0.0);
  EXPECT_DOUBLE_EQ(report.aggregate, 0.5);
}

TEST(MetricReportTest, CsvLayout) {
  MetricReport r;
  r.metric = "acc";
  r.per_class = {{0, 0.5}, {3, 1.0}};
  r.per_class_count = {{0, 2}, {3, 1}};
  r.aggregate = 0.75;
  r.sample_count = 3;
  std::ostringstream out;
  r.WriteCsv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "metric,class,value,count");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
}  // namespace pfdm
