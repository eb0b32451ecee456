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


#ifndef PFDM_DATA_H_
#define PFDM_DATA_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "pfdm/sample_batch.h"

namespace pfdm {

// IDX image/label pair (MNIST). Gzip-compressed files are read transparently.
// Pixels are scaled to [0, 1]; per-sample shape is 1 x rows x cols.
SampleBatch LoadMnistIdx(const std::filesystem::path& images,
                         const std::filesystem::path& labels);

// CIFAR-10 binary batches: 3073-byte records (label, 3072 RGB bytes).
// Pixels scaled to [0, 1], shape 3 x 32 x 32.
SampleBatch LoadCifar10Bin(const std::vector<std::filesystem::path>& paths);

// Area-average resampling of every channel to out_rows x out_cols.
SampleBatch ResizeArea(const SampleBatch& batch, int out_rows, int out_cols);

enum class PixelRange { kUnit, kSigned };  // [0,1] or [-1,1]
// Maps [0,1] data to the requested range.
SampleBatch ToPixelRange(const SampleBatch& batch, PixelRange range);

// Per-class holdout: `per_class` samples of every label go to `held_out`.
struct HoldoutSplit {
  SampleBatch train;
  SampleBatch held_out;
  std::vector<Index> train_source;
  std::vector<Index> held_out_source;
};
HoldoutSplit StratifiedHoldout(const SampleBatch& dataset, Index per_class,
                               std::uint64_t seed);

struct ClientPartition {
  int majority_cluster = 0;
  int minority_cluster = 1;
  Index majority_count = 0;
  Index minority_count = 0;
};

// Label clusters and per-client majority/minority draws. Mirroring the
// heterogeneity setup, a second client with swapped cluster ids reverses the
// majority and minority roles.
struct PartitionSpec {
  std::vector<std::set<int>> clusters;
  std::vector<ClientPartition> clients;
  std::uint64_t seed = 0;

  void Validate() const;

  static PartitionSpec MajorityMinority(std::vector<std::set<int>> clusters,
                                        Index majority, Index minority,
                                        std::uint64_t seed);
};

struct Partition {
  std::vector<SampleBatch> clients;
  // Source row in the input dataset for every client row.
  std::vector<std::vector<Index>> source_indices;
};

// Disjoint, seed-deterministic draws without replacement.
Partition PartitionDataset(const SampleBatch& dataset, const PartitionSpec& spec);

// CSV rows client_id,source_index,label.
void WritePartitionManifest(const Partition& partition, std::ostream& out);

struct NormPolicy {
  enum class Mode { kReport, kClip };
  Mode mode = Mode::kReport;
  // l2 ball radius C (0 = not enforced).
  double sample_bound = 0.0;
  // per-coordinate bound c (0 = not enforced).
  double coordinate_bound = 0.0;
};

struct NormReport {
  double max_l2 = 0.0;      // observed C
  double max_abs = 0.0;     // observed c
  Index clipped_samples = 0;
  std::string warning;
};

struct NormResult {
  SampleBatch batch;
  NormReport report;
};

// Report mode measures; clip mode projects onto the l2 ball and/or clamps
// coordinates, then measures the result.
NormResult ApplyNormPolicy(const SampleBatch& batch, const NormPolicy& policy);

// Rows whose label is in `classes`.
SampleBatch FilterLabels(const SampleBatch& batch, const std::set<int>& classes);

}  // namespace pfdm

#endif  // PFDM_DATA_H_
