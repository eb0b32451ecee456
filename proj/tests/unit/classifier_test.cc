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


#include "pfdm/classifier.h"

#include <cmath>

#include "gtest/gtest.h"
#include "pfdm/rng.h"

namespace pfdm {
namespace {

TEST(ClassifierTest, GradientMatchesFiniteDifferences) {
  ClassifierConfig cfg;
  cfg.num_classes = 3;
  cfg.conv1_channels = 2;
  cfg.conv2_channels = 3;
  cfg.hidden = 5;
  ConvClassifier clf({2, 4, 4}, cfg);
  RngStream rng(4, "fd");
  const Matrix x = rng.NormalMatrix(3, 32);
  const std::vector<int> y = {0, 2, 1};
  std::vector<double> grad(clf.num_parameters());
  clf.LossAndGradient(x, y, grad);
  std::vector<double> scratch(clf.num_parameters());
  double worst = 0;
  const double h = 1e-5;
  for (Index i = 0; i < clf.num_parameters(); ++i) {
    const double keep = clf.parameters()[i];
    clf.parameters()[i] = keep + h;
    const double up = clf.LossAndGradient(x, y, scratch);
    clf.parameters()[i] = keep - h;
    const double down = clf.LossAndGradient(x, y, scratch);
    clf.parameters()[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) /
                                std::max({1e-3, std::abs(fd), std::abs(grad[i])}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(ClassifierTest, LearnsPositionTask) {
  // The label is the quadrant holding a bright pixel.
  RngStream rng(5, "task");
  const int n = 400;
  Matrix x = rng.NormalMatrix(n, 64) * 0.1;
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng.UniformInt(0, 3));
    const int r = (y[i] / 2) * 4 + static_cast<int>(rng.UniformInt(0, 3));
    const int c = (y[i] % 2) * 4 + static_cast<int>(rng.UniformInt(0, 3));
    x(i, r * 8 + c) += 2.0;
  }
  const SampleBatch all(x, {1, 8, 8}, y);
  std::vector<Index> train_rows, test_rows;
  for (Index i = 0; i < n; ++i) (i < 300 ? train_rows : test_rows).push_back(i);
  ClassifierConfig cfg;
  cfg.num_classes = 4;
  cfg.epochs = 15;
  cfg.batch_size = 32;
  ConvClassifier clf({1, 8, 8}, cfg);
  clf.Fit(all.Select(train_rows));
  EXPECT_GT(Accuracy(clf, all.Select(test_rows)), 0.75);
}

TEST(ClassifierTest, DeterministicForSeed) {
  ClassifierConfig cfg;
  cfg.num_classes = 2;
  cfg.epochs = 1;
  ConvClassifier a({1, 4, 4}, cfg), b({1, 4, 4}, cfg);
  RngStream rng(6, "d");
  const SampleBatch data(rng.NormalMatrix(64, 16), {1, 4, 4},
                         std::vector<int>(64, 1));
  a.Fit(data);
  b.Fit(data);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(),
                         b.parameters().begin()));
}

TEST(ClassifierTest, RejectsOddSpatialSize) {
  ClassifierConfig cfg;
  EXPECT_ANY_THROW(ConvClassifier({1, 5, 4}, cfg));
}

}  // namespace
}  // namespace pfdm
