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


#include "pfdm/sample_batch.h"

#include <sstream>

#include "pfdm/errors.h"

namespace pfdm {

std::int64_t FlatSize(const SampleShape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string ShapeToString(const SampleShape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

SampleBatch::SampleBatch(Matrix data, SampleShape shape,
                         std::optional<std::vector<int>> labels,
                         std::optional<std::uint32_t> client_id)
    : data_(std::move(data)),
      shape_(std::move(shape)),
      labels_(std::move(labels)),
      client_id_(client_id) {
  if (shape_.empty()) shape_ = {static_cast<std::int64_t>(data_.cols())};
  if (FlatSize(shape_) != data_.cols()) {
    throw InvalidArgument("SampleBatch: shape " + ShapeToString(shape_) +
                          " does not match " + std::to_string(data_.cols()) +
                          " columns");
  }
  if (labels_ && static_cast<Index>(labels_->size()) != data_.rows()) {
    throw InvalidArgument("SampleBatch: label count differs from sample count");
  }
}

std::span<const int> SampleBatch::label_span() const {
  if (!labels_) return {};
  return *labels_;
}

SampleBatch SampleBatch::WithData(Matrix data) const {
  if (data.rows() != data_.rows() || data.cols() != data_.cols()) {
    throw InvalidArgument("SampleBatch::WithData: geometry mismatch");
  }
  return SampleBatch(std::move(data), shape_, labels_, client_id_);
}

SampleBatch SampleBatch::Select(std::span<const Index> rows) const {
  Matrix out(static_cast<Index>(rows.size()), data_.cols());
  std::optional<std::vector<int>> labels;
  if (labels_) labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= data_.rows()) {
      throw InvalidArgument("SampleBatch::Select: row out of range");
    }
    out.row(static_cast<Index>(i)) = data_.row(r);
    if (labels_) labels->push_back((*labels_)[static_cast<std::size_t>(r)]);
  }
  return SampleBatch(std::move(out), shape_, std::move(labels), client_id_);
}

void SampleBatch::Validate() const {
  if (data_.rows() < 1) throw InvalidArgument("SampleBatch: empty batch");
  if (!data_.allFinite()) {
    throw InvalidArgument("SampleBatch: non-finite entries");
  }
  if (labels_ && static_cast<Index>(labels_->size()) != data_.rows()) {
    throw InvalidArgument("SampleBatch: label count differs from sample count");
  }
  if (FlatSize(shape_) != data_.cols()) {
    throw InvalidArgument("SampleBatch: shape/column mismatch");
  }
}

SampleBatch SampleBatch::Concatenate(std::span<const SampleBatch> parts) {
  if (parts.empty()) throw InvalidArgument("Concatenate: no parts");
  const Index cols = parts.front().dim();
  const bool labeled = parts.front().has_labels();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.dim() != cols) throw InvalidArgument("Concatenate: width mismatch");
    if (p.has_labels() != labeled) {
      throw InvalidArgument("Concatenate: mixed labeled and unlabeled parts");
    }
    rows += p.count();
  }
  Matrix out(rows, cols);
  std::optional<std::vector<int>> labels;
  if (labeled) labels.emplace();
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.count()) = p.data();
    r += p.count();
    if (labeled) labels->insert(labels->end(), p.labels()->begin(),
                                p.labels()->end());
  }
  return SampleBatch(std::move(out), parts.front().shape(), std::move(labels));
}

}  // namespace pfdm
