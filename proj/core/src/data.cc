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


#include "pfdm/data.h"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "pfdm/errors.h"
#include "pfdm/rng.h"

namespace pfdm {
namespace {

// Reads a whole (optionally gzip-compressed) file.
std::vector<std::uint8_t> ReadMaybeGzip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw InvalidArgument("no such file: " + path.string());
  }
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      gzclose(f);
      throw FormatError("read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t BigEndian32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("IDX: truncated header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

SampleBatch LoadMnistIdx(const std::filesystem::path& images,
                         const std::filesystem::path& labels) {
  const auto img = ReadMaybeGzip(images);
  const auto lab = ReadMaybeGzip(labels);
  if (BigEndian32(img, 0) != 0x00000803) {
    throw FormatError("IDX images: bad magic in " + images.string());
  }
  if (BigEndian32(lab, 0) != 0x00000801) {
    throw FormatError("IDX labels: bad magic in " + labels.string());
  }
  const std::uint32_t n = BigEndian32(img, 4);
  const std::uint32_t rows = BigEndian32(img, 8);
  const std::uint32_t cols = BigEndian32(img, 12);
  const std::uint32_t n_labels = BigEndian32(lab, 4);
  if (n != n_labels) {
    throw FormatError("IDX: " + std::to_string(n) + " images but " +
                      std::to_string(n_labels) + " labels");
  }
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (img.size() != 16 + static_cast<std::size_t>(n) * pixels) {
    throw FormatError("IDX images: payload size does not match header");
  }
  if (lab.size() != 8 + static_cast<std::size_t>(n)) {
    throw FormatError("IDX labels: payload size does not match header");
  }
  Matrix data(n, static_cast<Index>(pixels));
  std::vector<int> y(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      data(i, static_cast<Index>(p)) = img[16 + i * pixels + p] / 255.0;
    }
    y[i] = lab[8 + i];
  }
  return SampleBatch(std::move(data), {1, rows, cols}, std::move(y));
}

SampleBatch LoadCifar10Bin(const std::vector<std::filesystem::path>& paths) {
  constexpr std::size_t kRecord = 3073;
  std::vector<SampleBatch> parts;
  for (const auto& path : paths) {
    const auto bytes = ReadMaybeGzip(path);
    if (bytes.empty() || bytes.size() % kRecord != 0) {
      throw FormatError("CIFAR-10: " + path.string() + " has length " +
                        std::to_string(bytes.size()) +
                        ", not a multiple of 3073");
    }
    const std::size_t n = bytes.size() / kRecord;
    Matrix data(static_cast<Index>(n), 3072);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = bytes[i * kRecord];
      if (y[i] > 9) throw FormatError("CIFAR-10: label out of range");
      for (std::size_t p = 0; p < 3072; ++p) {
        data(static_cast<Index>(i), static_cast<Index>(p)) =
            bytes[i * kRecord + 1 + p] / 255.0;
      }
    }
    parts.emplace_back(std::move(data), SampleShape{3, 32, 32}, std::move(y));
  }
  if (parts.empty()) throw InvalidArgument("CIFAR-10: no batch files given");
  return SampleBatch::Concatenate(parts);
}

SampleBatch ResizeArea(const SampleBatch& batch, int out_rows, int out_cols) {
  const auto& shape = batch.shape();
  if (shape.size() != 3) {
    throw InvalidArgument("ResizeArea: expected C x H x W samples");
  }
  if (out_rows < 1 || out_cols < 1) {
    throw InvalidArgument("ResizeArea: output size must be positive");
  }
  const Index c = shape[0], h = shape[1], w = shape[2];
  // Overlap weights of source pixel i with destination pixel o along one axis.
  auto weights = [](Index src, int dst) {
    Matrix m = Matrix::Zero(dst, src);
    const double scale = static_cast<double>(src) / dst;
    for (int o = 0; o < dst; ++o) {
      const double lo = o * scale, hi = (o + 1) * scale;
      for (Index i = static_cast<Index>(std::floor(lo));
           i < std::min<Index>(src, static_cast<Index>(std::ceil(hi))); ++i) {
        const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
        if (overlap > 0) m(o, i) = overlap / scale;
      }
    }
    return m;
  };
  const Matrix wr = weights(h, out_rows);
  const Matrix wc = weights(w, out_cols);
  Matrix out(batch.count(), c * out_rows * out_cols);
  for (Index n = 0; n < batch.count(); ++n) {
    for (Index ch = 0; ch < c; ++ch) {
      Eigen::Map<const Matrix> img(batch.data().row(n).data() + ch * h * w, h, w);
      const Matrix small = wr * img * wc.transpose();
      Eigen::Map<Matrix>(out.row(n).data() + ch * out_rows * out_cols, out_rows,
                         out_cols) = small;
    }
  }
  return SampleBatch(std::move(out), {c, out_rows, out_cols}, batch.labels(),
                     batch.client_id());
}

SampleBatch ToPixelRange(const SampleBatch& batch, PixelRange range) {
  if (range == PixelRange::kUnit) return batch;
  return batch.WithData((2.0 * batch.data().array() - 1.0).matrix());
}

HoldoutSplit StratifiedHoldout(const SampleBatch& dataset, Index per_class,
                               std::uint64_t seed) {
  if (!dataset.has_labels()) throw InvalidArgument("holdout: labels required");
  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < dataset.count(); ++i) {
    by_class[(*dataset.labels())[static_cast<std::size_t>(i)]].push_back(i);
  }
  RngStream rng(seed, "data/holdout");
  std::vector<bool> held(static_cast<std::size_t>(dataset.count()), false);
  for (auto& [label, rows] : by_class) {
    if (static_cast<Index>(rows.size()) <= per_class) {
      throw InvalidArgument("holdout: class " + std::to_string(label) +
                            " has too few samples");
    }
    for (Index p : rng.SampleWithoutReplacement(
             static_cast<Index>(rows.size()), per_class)) {
      held[static_cast<std::size_t>(rows[static_cast<std::size_t>(p)])] = true;
    }
  }
  HoldoutSplit split;
  for (Index i = 0; i < dataset.count(); ++i) {
    (held[static_cast<std::size_t>(i)] ? split.held_out_source
                                       : split.train_source)
        .push_back(i);
  }
  split.train = dataset.Select(split.train_source);
  split.held_out = dataset.Select(split.held_out_source);
  return split;
}

void PartitionSpec::Validate() const {
  if (clusters.empty()) throw InvalidArgument("partition: no clusters");
  std::set<int> seen;
  for (const auto& c : clusters) {
    if (c.empty()) throw InvalidArgument("partition: empty cluster");
    for (int label : c) {
      if (!seen.insert(label).second) {
        throw InvalidArgument("partition: clusters overlap on label " +
                              std::to_string(label));
      }
    }
  }
  if (clients.empty()) throw InvalidArgument("partition: no clients");
  const int k = static_cast<int>(clusters.size());
  for (const auto& c : clients) {
    if (c.majority_cluster < 0 || c.majority_cluster >= k ||
        c.minority_cluster < 0 || c.minority_cluster >= k) {
      throw InvalidArgument("partition: cluster id out of range");
    }
    if (c.majority_count < 0 || c.minority_count < 0) {
      throw InvalidArgument("partition: negative count");
    }
    if (c.majority_count + c.minority_count == 0) {
      throw InvalidArgument("partition: client would be empty");
    }
  }
}

PartitionSpec PartitionSpec::MajorityMinority(
    std::vector<std::set<int>> clusters, Index majority, Index minority,
    std::uint64_t seed) {
  PartitionSpec spec;
  spec.clusters = std::move(clusters);
  spec.clients = {{0, 1, majority, minority}, {1, 0, majority, minority}};
  spec.seed = seed;
  return spec;
}

Partition PartitionDataset(const SampleBatch& dataset,
                           const PartitionSpec& spec) {
  spec.Validate();
  if (!dataset.has_labels()) throw InvalidArgument("partition: labels required");
  // Pool of unused rows per cluster, shuffled once.
  RngStream rng(spec.seed, "data/partition");
  std::vector<std::vector<Index>> pools(spec.clusters.size());
  for (Index i = 0; i < dataset.count(); ++i) {
    const int y = (*dataset.labels())[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
      if (spec.clusters[c].contains(y)) pools[c].push_back(i);
    }
  }
  for (auto& pool : pools) {
    const auto perm = rng.SampleWithoutReplacement(
        static_cast<Index>(pool.size()), static_cast<Index>(pool.size()));
    std::vector<Index> shuffled;
    for (Index p : perm) shuffled.push_back(pool[static_cast<std::size_t>(p)]);
    pool = std::move(shuffled);
  }
  std::vector<std::size_t> cursor(pools.size(), 0);
  auto take = [&](int cluster, Index n, std::vector<Index>& rows) {
    auto& pool = pools[static_cast<std::size_t>(cluster)];
    auto& at = cursor[static_cast<std::size_t>(cluster)];
    if (at + static_cast<std::size_t>(n) > pool.size()) {
      throw InvalidArgument("partition: cluster " + std::to_string(cluster) +
                            " has only " + std::to_string(pool.size() - at) +
                            " unused samples, need " + std::to_string(n));
    }
    rows.insert(rows.end(), pool.begin() + static_cast<std::ptrdiff_t>(at),
                pool.begin() + static_cast<std::ptrdiff_t>(at + n));
    at += static_cast<std::size_t>(n);
  };
  Partition out;
  for (std::size_t i = 0; i < spec.clients.size(); ++i) {
    const auto& c = spec.clients[i];
    std::vector<Index> rows;
    take(c.majority_cluster, c.majority_count, rows);
    take(c.minority_cluster, c.minority_count, rows);
    SampleBatch part = dataset.Select(rows);
    part.set_client_id(static_cast<std::uint32_t>(i));
    out.clients.push_back(std::move(part));
    out.source_indices.push_back(std::move(rows));
  }
  return out;
}

void WritePartitionManifest(const Partition& partition, std::ostream& out) {
  out << "client_id,source_index,label\n";
  for (std::size_t c = 0; c < partition.clients.size(); ++c) {
    const auto& batch = partition.clients[c];
    const auto& src = partition.source_indices[c];
    for (std::size_t i = 0; i < src.size(); ++i) {
      out << c << ',' << src[i] << ',';
      if (batch.has_labels()) out << (*batch.labels())[i];
      out << '\n';
    }
  }
}

NormResult ApplyNormPolicy(const SampleBatch& batch, const NormPolicy& policy) {
  Matrix data = batch.data();
  NormReport report;
  if (policy.mode == NormPolicy::Mode::kClip) {
    if (policy.sample_bound <= 0.0 && policy.coordinate_bound <= 0.0) {
      throw InvalidArgument("clip policy needs a positive bound");
    }
    for (Index i = 0; i < data.rows(); ++i) {
      bool clipped = false;
      if (policy.coordinate_bound > 0.0) {
        const double c = policy.coordinate_bound;
        if (data.row(i).cwiseAbs().maxCoeff() > c) clipped = true;
        data.row(i) = data.row(i).cwiseMax(-c).cwiseMin(c);
      }
      if (policy.sample_bound > 0.0) {
        const double norm = data.row(i).norm();
        if (norm > policy.sample_bound) {
          data.row(i) *= policy.sample_bound / norm;
          clipped = true;
        }
      }
      if (clipped) ++report.clipped_samples;
    }
  } else {
    report.warning =
        "observed bounds describe this dataset only; the privacy guarantee "
        "needs a bound that holds for every admissible input";
  }
  if (data.rows() > 0) {
    report.max_l2 = data.rowwise().norm().maxCoeff();
    report.max_abs = data.cwiseAbs().maxCoeff();
  }
  return {batch.WithData(std::move(data)), report};
}

SampleBatch FilterLabels(const SampleBatch& batch, const std::set<int>& classes) {
  if (!batch.has_labels()) throw InvalidArgument("FilterLabels: no labels");
  std::vector<Index> rows;
  for (Index i = 0; i < batch.count(); ++i) {
    if (classes.contains((*batch.labels())[static_cast<std::size_t>(i)])) {
      rows.push_back(i);
    }
  }
  return batch.Select(rows);
}

}  // namespace pfdm
