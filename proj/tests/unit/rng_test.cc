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


#include "pfdm/rng.h"

#include <algorithm>
#include <set>

#include "gtest/gtest.h"
#include "pfdm/sample_batch.h"
#include "pfdm/errors.h"

namespace pfdm {
namespace {

TEST(RngStreamTest, SameSeedAndNameReproduce) {
  RngStream a(7, "x"), b(7, "x");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.Normal(), b.Normal());
}

TEST(RngStreamTest, NamesSeparateStreams) {
  RngStream a(7, "x"), b(7, "y");
  EXPECT_NE(a.Normal(), b.Normal());
}

TEST(RngStreamTest, ForkDoesNotConsumeParent) {
  RngStream a(3, "p"), b(3, "p");
  RngStream child = a.Fork("c");
  (void)child.Normal();
  EXPECT_EQ(a.Normal(), b.Normal());
}

TEST(RngStreamTest, SampleWithoutReplacementIsDistinct) {
  RngStream r(1, "s");
  const auto idx = r.SampleWithoutReplacement(50, 50);
  std::set<Index> seen(idx.begin(), idx.end());
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), 49);
}

TEST(RngStreamTest, UniformIntInclusiveBounds) {
  RngStream r(2, "u");
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(r.UniformInt(1, 3));
  EXPECT_EQ(seen, (std::set<std::int64_t>{1, 2, 3}));
}

TEST(DeriveSeedTest, DependsOnBothInputs) {
  EXPECT_NE(DeriveSeed(1, "a"), DeriveSeed(2, "a"));
  EXPECT_NE(DeriveSeed(1, "a"), DeriveSeed(1, "b"));
  EXPECT_EQ(DeriveSeed(1, "a"), DeriveSeed(1, "a"));
}

TEST(SampleBatchTest, ValidateRejectsNonFinite) {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(SampleBatch(m).Validate(), InvalidArgument);
}

TEST(SampleBatchTest, LabelCountMustMatch) {
  EXPECT_THROW(SampleBatch(Matrix::Zero(3, 2), {}, std::vector<int>{1, 2}),
               InvalidArgument);
}

TEST(SampleBatchTest, ShapeMustMatchColumns) {
  EXPECT_THROW(SampleBatch(Matrix::Zero(3, 4), {1, 3, 3}), InvalidArgument);
}

TEST(SampleBatchTest, SelectAndConcatenateKeepLabels) {
  Matrix m(3, 1);
  m << 1, 2, 3;
  SampleBatch b(m, {}, std::vector<int>{5, 6, 7});
  const std::vector<Index> rows = {2, 0};
  SampleBatch s = b.Select(rows);
  EXPECT_EQ((*s.labels()), (std::vector<int>{7, 5}));
  EXPECT_EQ(s.data()(0, 0), 3);
  const std::vector<SampleBatch> parts = {b, s};
  SampleBatch c = SampleBatch::Concatenate(parts);
  EXPECT_EQ(c.count(), 5);
  EXPECT_EQ((*c.labels())[4], 5);
}

}  // namespace
}  // namespace pfdm
