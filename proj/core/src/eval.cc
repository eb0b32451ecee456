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

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "pfdm/errors.h"

namespace pfdm {
namespace {

double MeanOf(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); 0 for fewer than two values.
double StdOf(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = MeanOf(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Matrix SquaredDistances(const Matrix& a, const Matrix& b) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d = -2.0 * a * b.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

double OffDiagonalMean(const Matrix& k) {
  const Index n = k.rows();
  return (k.sum() - k.trace()) / static_cast<double>(n * (n - 1));
}

}  // namespace

void MetricReport::WriteCsv(std::ostream& out) const {
  out << "metric,class,value,count\n";
  out << std::setprecision(10);
  for (const auto& [label, value] : per_class) {
    auto it = per_class_count.find(label);
    out << metric << ',' << label << ',' << value << ','
        << (it == per_class_count.end() ? 0 : it->second) << '\n';
  }
  out << metric << ",aggregate," << aggregate << ',' << sample_count << '\n';
}

void MetricReport::WriteSummary(std::ostream& out) const {
  out << "metric: " << metric << '\n'
      << "aggregate: " << std::setprecision(6) << aggregate;
  if (aggregate_std > 0.0) out << " +- " << aggregate_std;
  out << '\n'
      << "aggregate_rule: " << aggregate_rule << '\n'
      << "samples: " << sample_count << '\n'
      << "seed: " << seed << '\n'
      << "config_hash: " << config_hash << '\n';
}

double GaussianMomentDistance(const Matrix& samples, const Vector& mean,
                              double stddev) {
  if (samples.rows() < 1 || samples.cols() != mean.size()) {
    throw InvalidArgument("moment distance: shape mismatch");
  }
  const RowVector mu = samples.colwise().mean();
  const RowVector var =
      (samples.rowwise() - mu).array().square().colwise().mean().matrix();
  return (mu.transpose() - mean).squaredNorm() +
         (var.array().sqrt() - stddev).square().sum();
}

double MedianPairwiseDistance(const Matrix& samples) {
  if (samples.rows() < 2) throw InvalidArgument("need at least two samples");
  const Matrix d = SquaredDistances(samples, samples);
  std::vector<double> v;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = i + 1; j < d.cols(); ++j) v.push_back(d(i, j));
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return std::sqrt(*mid);
}

MmdResult KernelMmd(const Matrix& a, const Matrix& b,
                    const BandwidthPolicy& policy) {
  if (a.rows() < 2 || b.rows() < 2) {
    throw InvalidArgument("MMD needs at least two samples per side");
  }
  if (a.cols() != b.cols()) throw InvalidArgument("MMD: dimension mismatch");
  const Matrix daa = SquaredDistances(a, a);
  const Matrix dbb = SquaredDistances(b, b);
  const Matrix dab = SquaredDistances(a, b);
  double h = policy.value;
  if (policy.kind == BandwidthPolicy::Kind::kMedian) {
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(daa.size() + dbb.size() + dab.size()));
    for (Index i = 0; i < daa.rows(); ++i)
      for (Index j = i + 1; j < daa.cols(); ++j) d.push_back(daa(i, j));
    for (Index i = 0; i < dbb.rows(); ++i)
      for (Index j = i + 1; j < dbb.cols(); ++j) d.push_back(dbb(i, j));
    for (Index i = 0; i < dab.size(); ++i) d.push_back(dab.data()[i]);
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    h = std::sqrt(*mid);
    if (!(h > 0.0)) h = 1.0;
  }
  if (!(h > 0.0)) throw InvalidArgument("MMD bandwidth must be positive");
  const double s = -1.0 / (2.0 * h * h);
  const Matrix kaa = (daa.array() * s).exp().matrix();
  const Matrix kbb = (dbb.array() * s).exp().matrix();
  const double kab = (dab.array() * s).exp().mean();
  return {OffDiagonalMean(kaa) + OffDiagonalMean(kbb) - 2.0 * kab, h};
}

MetricReport DownstreamAccuracy(const SampleBatch& synthetic_train,
                                const SampleBatch& real_test,
                                const DownstreamConfig& config) {
  if (!synthetic_train.has_labels() || !real_test.has_labels()) {
    throw InvalidArgument("downstream: labeled data required");
  }
  if (config.seeds.empty()) throw InvalidArgument("downstream: no seeds");
  std::set<int> required = config.required_classes;
  if (required.empty()) {
    required.insert(real_test.labels()->begin(), real_test.labels()->end());
  }
  const std::set<int> present(synthetic_train.labels()->begin(),
                              synthetic_train.labels()->end());
  for (int c : required) {
    if (!present.contains(c)) {
      throw InvalidArgument("downstream: class " + std::to_string(c) +
                            " missing from the training set");
    }
  }
  MetricReport report;
  report.metric = "downstream_accuracy";
  report.aggregate_rule = "mean over seeds of test accuracy";
  report.sample_count = synthetic_train.count();
  report.seed = config.seeds.front();
  std::vector<double> accs;
  std::map<int, std::vector<double>> recalls;
  for (std::uint64_t seed : config.seeds) {
    ClassifierConfig cc = config.classifier;
    cc.seed = seed;
    ConvClassifier clf(synthetic_train.shape(), cc);
    clf.Fit(synthetic_train);
    const auto pred = clf.Predict(real_test.data());
    std::map<int, std::pair<Index, Index>> hits;  // label -> (correct, total)
    Index correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const int y = (*real_test.labels())[i];
      auto& [c, t] = hits[y];
      ++t;
      if (pred[i] == y) {
        ++c;
        ++correct;
      }
    }
    accs.push_back(static_cast<double>(correct) /
                   static_cast<double>(pred.size()));
    for (const auto& [y, ct] : hits) {
      recalls[y].push_back(static_cast<double>(ct.first) /
                           static_cast<double>(ct.second));
      report.per_class_count[y] = ct.second;
    }
  }
  for (const auto& [y, r] : recalls) report.per_class[y] = MeanOf(r);
  report.aggregate = MeanOf(accs);
  report.aggregate_std = StdOf(accs);
  return report;
}

MetricReport PerClassReport(const SampleBatch& samples,
                            const ConvClassifier& classifier) {
  if (!samples.has_labels() || samples.count() == 0) {
    throw InvalidArgument("per-class report: labeled samples required");
  }
  const auto pred = classifier.Predict(samples.data());
  std::map<int, std::pair<Index, Index>> hits;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int y = (*samples.labels())[i];
    auto& [c, t] = hits[y];
    ++t;
    if (pred[i] == y) ++c;
  }
  MetricReport report;
  report.metric = "classifier_agreement";
  report.aggregate_rule = "unweighted mean over requested labels";
  report.sample_count = samples.count();
  std::vector<double> values;
  for (const auto& [y, ct] : hits) {
    const double v =
        static_cast<double>(ct.first) / static_cast<double>(ct.second);
    report.per_class[y] = v;
    report.per_class_count[y] = ct.second;
    values.push_back(v);
  }
  report.aggregate = MeanOf(values);
  return report;
}

}  // namespace pfdm
