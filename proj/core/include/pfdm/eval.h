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


#ifndef PFDM_EVAL_H_
#define PFDM_EVAL_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pfdm/classifier.h"
#include "pfdm/sample_batch.h"

namespace pfdm {

struct MetricReport {
  std::string metric;
  // Per-class values and counts keyed by label.
  std::map<int, double> per_class;
  std::map<int, Index> per_class_count;
  double aggregate = 0.0;
  double aggregate_std = 0.0;
  std::string aggregate_rule;
  Index sample_count = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  void WriteCsv(std::ostream& out) const;
  void WriteSummary(std::ostream& out) const;
};

// Squared 2-Wasserstein distance between the diagonal Gaussian fitted to
// `samples` and N(mean, s^2 I):  ||mu^ - mu||^2 + sum_i (sqrt(v^_i) - s)^2,
// with v^ the (biased, 1/n) per-coordinate variance.
double GaussianMomentDistance(const Matrix& samples, const Vector& mean,
                              double stddev);

struct BandwidthPolicy {
  enum class Kind { kMedian, kFixed };
  Kind kind = Kind::kMedian;
  double value = 1.0;  // used by kFixed
};

struct MmdResult {
  double mmd2 = 0.0;
  double bandwidth = 0.0;
};

// Median Euclidean distance over all unordered pairs of rows.
double MedianPairwiseDistance(const Matrix& samples);

// Unbiased squared MMD with k(x, y) = exp(-||x - y||^2 / (2 h^2)). The median
// heuristic takes h as the median pairwise distance over the pooled sample.
MmdResult KernelMmd(const Matrix& a, const Matrix& b,
                    const BandwidthPolicy& policy = {});

struct DownstreamConfig {
  ClassifierConfig classifier;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  // Classes that must be present in the training set; empty = all present in
  // the test set.
  std::set<int> required_classes;
};

// Trains one classifier per seed on `synthetic_train` and reports mean and
// standard deviation of accuracy on `real_test`. Per-class entries hold the
// mean per-class recall.
MetricReport DownstreamAccuracy(const SampleBatch& synthetic_train,
                                const SampleBatch& real_test,
                                const DownstreamConfig& config);

// Fraction of samples that `classifier` assigns to their requested label,
// per label. The aggregate is the unweighted mean over labels.
MetricReport PerClassReport(const SampleBatch& samples,
                            const ConvClassifier& classifier);

}  // namespace pfdm

#endif  // PFDM_EVAL_H_
