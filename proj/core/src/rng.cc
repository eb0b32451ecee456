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


#include "pfdm/rng.h"

#include <numeric>

#include "pfdm/errors.h"

namespace pfdm {

std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t StreamSeed(std::uint64_t seed, std::string_view name) {
  return SplitMix64(SplitMix64(seed) ^ Fnv1a64(name));
}

}  // namespace

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view name) {
  return StreamSeed(seed, name);
}

RngStream::RngStream(std::uint64_t seed, std::string_view name)
    : seed_(StreamSeed(seed, name)), engine_(seed_) {}

RngStream RngStream::Fork(std::string_view name) const {
  return RngStream(seed_, name);
}

std::int64_t RngStream::UniformInt(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw InvalidArgument("UniformInt: empty range");
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  return dist(engine_);
}

Matrix RngStream::NormalMatrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  double* p = m.data();
  for (Index i = 0; i < m.size(); ++i) p[i] = normal_(engine_);
  return m;
}

std::vector<Index> RngStream::SampleWithoutReplacement(Index n, Index k) {
  if (k < 0 || k > n) {
    throw InvalidArgument("SampleWithoutReplacement: k must be in [0, n]");
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  // Partial Fisher-Yates.
  for (Index i = 0; i < k; ++i) {
    const Index j = UniformInt(i, n - 1);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(static_cast<std::size_t>(k));
  return perm;
}

}  // namespace pfdm
