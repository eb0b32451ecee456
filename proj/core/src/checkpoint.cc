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


#include "pfdm/checkpoint.h"

#include <fstream>
#include <iterator>

#include "pfdm/errors.h"
#include "pfdm/wire.h"

namespace pfdm {
namespace {

constexpr char kMagic[4] = {'P', 'F', 'D', 'K'};

void PutString(std::vector<std::uint8_t>& out, const std::string& s) {
  le::PutU32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::string GetString(le::Reader& in) {
  const auto n = in.U32();
  const auto bytes = in.Bytes(n);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace

std::vector<std::uint8_t> Checkpoint::Encode() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  le::PutU16(out, kVersion);
  le::PutU32(out, static_cast<std::uint32_t>(attributes.size()));
  for (const auto& [k, v] : attributes) {
    PutString(out, k);
    PutString(out, v);
  }
  le::PutU32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    PutString(out, t.name);
    le::PutU32(out, static_cast<std::uint32_t>(t.dims.size()));
    std::uint64_t expected = 1;
    for (auto d : t.dims) {
      le::PutU32(out, d);
      expected *= d;
    }
    if (expected != t.values.size()) {
      throw InvalidArgument("checkpoint tensor '" + t.name +
                            "': dims disagree with value count");
    }
    le::PutU64(out, t.values.size());
    for (float v : t.values) le::PutF32(out, v);
  }
  return out;
}

Checkpoint Checkpoint::Decode(const std::vector<std::uint8_t>& bytes) {
  le::Reader in(bytes);
  const auto magic = in.Bytes(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = in.U16();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_attr = in.U32();
  for (std::uint32_t i = 0; i < n_attr; ++i) {
    std::string key = GetString(in);
    ckpt.attributes[key] = GetString(in);
  }
  const auto n_tensors = in.U32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorRecord rec;
    rec.name = GetString(in);
    const auto rank = in.U32();
    std::uint64_t expected = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      rec.dims.push_back(in.U32());
      expected *= rec.dims.back();
    }
    const auto count = in.U64();
    if (count != expected || count > in.remaining() / 4) {
      throw FormatError("checkpoint: tensor '" + rec.name + "' is truncated");
    }
    rec.values.resize(count);
    for (auto& v : rec.values) v = in.F32();
    ckpt.tensors.push_back(std::move(rec));
  }
  if (in.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void Checkpoint::Save(const std::filesystem::path& path) const {
  const auto bytes = Encode();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return Decode(bytes);
}

const TensorRecord& Checkpoint::Tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw FormatError("checkpoint: missing tensor '" + name + "'");
}

const std::string& Checkpoint::Attribute(const std::string& key) const {
  auto it = attributes.find(key);
  if (it == attributes.end()) {
    throw FormatError("checkpoint: missing attribute '" + key + "'");
  }
  return it->second;
}

}  // namespace pfdm
