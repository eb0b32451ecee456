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


#ifndef PFDM_IMAGE_IO_H_
#define PFDM_IMAGE_IO_H_

#include <filesystem>
#include <vector>

#include "pfdm/sample_batch.h"

namespace pfdm {

// Writes a grid PNG (8-bit, gray for 1 channel, RGB for 3) with one row per
// entry of `rows`; every batch in `rows` contributes up to `columns` images.
// Pixel values are clamped from [lo, hi] to [0, 255].
void WritePngGrid(const std::filesystem::path& path,
                  const std::vector<SampleBatch>& rows, int columns,
                  double lo = 0.0, double hi = 1.0);

// Sample-set file:
//   "PFSS" u16 version | u32 count | u32 rank | rank x u32 dims |
//   u8 label flag | count*flat f32 | count u16 labels (iff flagged)
void SaveSampleSet(const std::filesystem::path& path, const SampleBatch& batch);
SampleBatch LoadSampleSet(const std::filesystem::path& path);

}  // namespace pfdm

#endif  // PFDM_IMAGE_IO_H_
