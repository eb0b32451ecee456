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


#include "pfdm/wire.h"

#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>

#include "pfdm/errors.h"

namespace pfdm {
namespace le {

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void PutU64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void PutF32(std::vector<std::uint8_t>& out, float v) {
  PutU32(out, std::bit_cast<std::uint32_t>(v));
}

std::span<const std::uint8_t> Reader::Bytes(std::size_t n) {
  if (n > remaining()) throw FormatError("unexpected end of data");
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::U8() { return Bytes(1)[0]; }

std::uint16_t Reader::U16() {
  auto b = Bytes(2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t Reader::U32() {
  auto b = Bytes(4);
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

std::uint64_t Reader::U64() {
  auto b = Bytes(8);
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

float Reader::F32() { return std::bit_cast<float>(U32()); }

}  // namespace le

namespace {
constexpr char kMagic[4] = {'P', 'F', 'D', 'M'};
}  // namespace

NoisyDatasetMessage NoisyDatasetMessage::FromBatch(
    std::uint32_t client_id, int t0, const ScheduleFingerprint& fingerprint,
    const SampleBatch& noisy) {
  NoisyDatasetMessage msg;
  msg.client_id = client_id;
  msg.t0 = static_cast<std::uint32_t>(t0);
  msg.count = static_cast<std::uint32_t>(noisy.count());
  msg.flat_dim = static_cast<std::uint32_t>(noisy.dim());
  msg.fingerprint = fingerprint;
  msg.samples.resize(static_cast<std::size_t>(noisy.data().size()));
  const double* src = noisy.data().data();
  for (std::size_t i = 0; i < msg.samples.size(); ++i) {
    msg.samples[i] = static_cast<float>(src[i]);
  }
  if (noisy.has_labels()) {
    auto& labels = msg.labels.emplace();
    for (int y : *noisy.labels()) {
      if (y < 0 || y > 0xffff) {
        throw InvalidArgument("message labels must fit in u16");
      }
      labels.push_back(static_cast<std::uint16_t>(y));
    }
  }
  return msg;
}

SampleBatch NoisyDatasetMessage::ToBatch(const SampleShape& shape) const {
  if (FlatSize(shape) != flat_dim) {
    throw InvalidArgument("message flat dim does not match shape " +
                          ShapeToString(shape));
  }
  Matrix data(count, flat_dim);
  double* dst = data.data();
  for (std::size_t i = 0; i < samples.size(); ++i) dst[i] = samples[i];
  std::optional<std::vector<int>> out_labels;
  if (labels) out_labels.emplace(labels->begin(), labels->end());
  return SampleBatch(std::move(data), shape, std::move(out_labels), client_id);
}

std::vector<std::uint8_t> NoisyDatasetMessage::Encode() const {
  if (samples.size() != static_cast<std::size_t>(count) * flat_dim) {
    throw InvalidArgument("message: sample payload disagrees with N x dim");
  }
  if (labels && labels->size() != count) {
    throw InvalidArgument("message: label count disagrees with N");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + samples.size() * 4 +
              (labels ? labels->size() * 2 : 0));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  le::PutU16(out, kVersion);
  le::PutU32(out, client_id);
  le::PutU32(out, t0);
  le::PutU32(out, count);
  le::PutU32(out, flat_dim);
  out.insert(out.end(), fingerprint.begin(), fingerprint.end());
  out.push_back(labels ? 1 : 0);
  for (float v : samples) le::PutF32(out, v);
  if (labels) {
    for (auto y : *labels) le::PutU16(out, y);
  }
  return out;
}

NoisyDatasetMessage NoisyDatasetMessage::Decode(
    std::span<const std::uint8_t> bytes) {
  if (!LooksLikeNoisyDatasetMessage(bytes)) {
    throw FormatError("message: bad magic");
  }
  le::Reader in(bytes.subspan(4));
  const auto version = in.U16();
  if (version != kVersion) {
    throw FormatError("message: unsupported version " + std::to_string(version));
  }
  NoisyDatasetMessage msg;
  msg.client_id = in.U32();
  msg.t0 = in.U32();
  msg.count = in.U32();
  msg.flat_dim = in.U32();
  const auto fp = in.Bytes(32);
  std::copy(fp.begin(), fp.end(), msg.fingerprint.begin());
  const auto flag = in.U8();
  if (flag > 1) throw FormatError("message: label flag must be 0 or 1");
  const std::uint64_t n = static_cast<std::uint64_t>(msg.count) * msg.flat_dim;
  const std::uint64_t need = n * 4 + (flag ? msg.count * 2ULL : 0);
  if (need != in.remaining()) {
    throw FormatError("message: payload length " +
                      std::to_string(in.remaining()) + " != expected " +
                      std::to_string(need));
  }
  msg.samples.resize(n);
  for (auto& v : msg.samples) v = in.F32();
  if (flag) {
    auto& labels = msg.labels.emplace(msg.count);
    for (auto& y : labels) y = in.U16();
  }
  return msg;
}

bool LooksLikeNoisyDatasetMessage(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4,
                                         std::begin(kMagic));
}

void WriteFrame(std::ostream& out, std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> prefix;
  le::PutU64(prefix, bytes.size());
  out.write(reinterpret_cast<const char*>(prefix.data()), 8);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("frame write failed");
}

std::optional<std::vector<std::uint8_t>> ReadFrame(std::istream& in) {
  std::uint8_t prefix[8];
  in.read(reinterpret_cast<char*>(prefix), 8);
  if (in.gcount() == 0 && in.eof()) return std::nullopt;
  if (in.gcount() != 8) throw FormatError("frame: truncated length prefix");
  const std::uint64_t n = le::Reader(prefix).U64();
  std::vector<std::uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) {
    throw FormatError("frame: truncated payload");
  }
  return bytes;
}

namespace {

void WriteAll(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket write: ") +
                               std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns bytes read; fewer than n only at end of stream.
std::size_t ReadAll(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, data + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket read: ") +
                               std::strerror(errno));
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

}  // namespace

void WriteFrameFd(int fd, std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> prefix;
  le::PutU64(prefix, bytes.size());
  WriteAll(fd, prefix.data(), prefix.size());
  WriteAll(fd, bytes.data(), bytes.size());
}

std::optional<std::vector<std::uint8_t>> ReadFrameFd(int fd) {
  std::uint8_t prefix[8];
  const std::size_t got = ReadAll(fd, prefix, 8);
  if (got == 0) return std::nullopt;
  if (got != 8) throw FormatError("frame: truncated length prefix");
  const std::uint64_t n = le::Reader(prefix).U64();
  std::vector<std::uint8_t> bytes(n);
  if (ReadAll(fd, bytes.data(), n) != n) {
    throw FormatError("frame: truncated payload");
  }
  return bytes;
}

}  // namespace pfdm
