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


#ifndef PFDM_WIRE_H_
#define PFDM_WIRE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "pfdm/sample_batch.h"
#include "pfdm/schedule.h"

namespace pfdm {

// The only payload a client ever sends. Byte layout, little-endian:
//   "PFDM" | u16 version | u32 client_id | u32 t0 | u32 N | u32 flat_dim |
//   32-byte schedule fingerprint | u8 label flag |
//   N*flat_dim f32 samples | N u16 labels (iff flag == 1)
struct NoisyDatasetMessage {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 4 + 2 + 4 * 4 + 32 + 1;

  std::uint32_t client_id = 0;
  std::uint32_t t0 = 0;
  std::uint32_t count = 0;
  std::uint32_t flat_dim = 0;
  ScheduleFingerprint fingerprint{};
  std::vector<float> samples;  // row-major count x flat_dim
  std::optional<std::vector<std::uint16_t>> labels;

  // Builds a message from released samples; values are rounded to f32.
  static NoisyDatasetMessage FromBatch(std::uint32_t client_id, int t0,
                                       const ScheduleFingerprint& fingerprint,
                                       const SampleBatch& noisy);

  SampleBatch ToBatch(const SampleShape& shape) const;

  std::vector<std::uint8_t> Encode() const;
  static NoisyDatasetMessage Decode(std::span<const std::uint8_t> bytes);

  friend bool operator==(const NoisyDatasetMessage&,
                         const NoisyDatasetMessage&) = default;
};

// True when `bytes` starts with the message magic.
bool LooksLikeNoisyDatasetMessage(std::span<const std::uint8_t> bytes);

// Stream framing: u64 little-endian length, then the bytes.
void WriteFrame(std::ostream& out, std::span<const std::uint8_t> bytes);
// std::nullopt on clean end-of-stream; FormatError on a truncated frame.
std::optional<std::vector<std::uint8_t>> ReadFrame(std::istream& in);

// Same framing over a POSIX file descriptor.
void WriteFrameFd(int fd, std::span<const std::uint8_t> bytes);
std::optional<std::vector<std::uint8_t>> ReadFrameFd(int fd);

// Little-endian primitives shared by the binary formats.
namespace le {
void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v);
void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v);
void PutU64(std::vector<std::uint8_t>& out, std::uint64_t v);
void PutF32(std::vector<std::uint8_t>& out, float v);

// Bounds-checked cursor; throws FormatError when reading past the end.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t U8();
  std::uint16_t U16();
  std::uint32_t U32();
  std::uint64_t U64();
  float F32();
  std::span<const std::uint8_t> Bytes(std::size_t n);
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};
}  // namespace le

}  // namespace pfdm

#endif  // PFDM_WIRE_H_
