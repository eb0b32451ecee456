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


#ifndef PFDM_CHECKPOINT_H_
#define PFDM_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pfdm {

// Versioned parameter blob. Layout (all integers little-endian):
//   "PFDK" u16 version
//   u32 attribute count, then per attribute: u32 len, key, u32 len, value
//   u32 tensor count, then per tensor:
//     u32 name len, name, u32 rank, rank x u32 dims, u64 element count,
//     element count x f32
struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;

  std::map<std::string, std::string> attributes;
  std::vector<TensorRecord> tensors;

  std::vector<std::uint8_t> Encode() const;
  static Checkpoint Decode(const std::vector<std::uint8_t>& bytes);

  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);

  const TensorRecord& Tensor(const std::string& name) const;
  const std::string& Attribute(const std::string& key) const;
};

}  // namespace pfdm

#endif  // PFDM_CHECKPOINT_H_
