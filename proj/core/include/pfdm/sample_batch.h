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


#ifndef PFDM_SAMPLE_BATCH_H_
#define PFDM_SAMPLE_BATCH_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfdm/tensor.h"

namespace pfdm {

// Per-sample shape, e.g. {1, 28, 28} for MNIST or {3, 32, 32} for CIFAR-10.
using SampleShape = std::vector<std::int64_t>;

std::int64_t FlatSize(const SampleShape& shape);
std::string ShapeToString(const SampleShape& shape);

// A batch of samples stored as a (count x flat-dimension) matrix. Labels are
// public class ids and travel alongside the data; client_id tags provenance.
class SampleBatch {
 public:
  SampleBatch() = default;
  // Flat shape {cols} is assumed when `shape` is empty.
  explicit SampleBatch(Matrix data, SampleShape shape = {},
                       std::optional<std::vector<int>> labels = std::nullopt,
                       std::optional<std::uint32_t> client_id = std::nullopt);

  Index count() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  const SampleShape& shape() const { return shape_; }

  const Matrix& data() const { return data_; }
  Matrix& mutable_data() { return data_; }

  bool has_labels() const { return labels_.has_value(); }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  // Empty span when unlabeled.
  std::span<const int> label_span() const;

  const std::optional<std::uint32_t>& client_id() const { return client_id_; }
  void set_client_id(std::optional<std::uint32_t> id) { client_id_ = id; }

  // Same metadata, new data of identical geometry.
  SampleBatch WithData(Matrix data) const;
  SampleBatch Select(std::span<const Index> rows) const;

  // Throws InvalidArgument unless count >= 1, entries finite, label count
  // matches and the shape agrees with the column count.
  void Validate() const;

  static SampleBatch Concatenate(std::span<const SampleBatch> parts);

 private:
  Matrix data_;
  SampleShape shape_;
  std::optional<std::vector<int>> labels_;
  std::optional<std::uint32_t> client_id_;
};

}  // namespace pfdm

#endif  // PFDM_SAMPLE_BATCH_H_
