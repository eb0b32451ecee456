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


#ifndef PFDM_RNG_H_
#define PFDM_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "pfdm/tensor.h"

namespace pfdm {

// A named, seedable random stream. Streams with the same (seed, name) produce
// identical sequences; different names give independent-looking streams so
// that e.g. the minibatch sampler and the noise source never share state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  // Derives a child stream; used to hand per-client or per-seed streams out of
  // a parent without consuming parent draws.
  RngStream Fork(std::string_view name) const;

  double Normal() { return normal_(engine_); }
  double Uniform() { return uniform_(engine_); }
  // Uniform integer in [lo, hi].
  std::int64_t UniformInt(std::int64_t lo, std::int64_t hi);

  Matrix NormalMatrix(Index rows, Index cols);

  // First `k` entries of a uniformly random permutation of [0, n).
  std::vector<Index> SampleWithoutReplacement(Index n, Index k);

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// 64-bit FNV-1a; stable across platforms, used for stream naming.
std::uint64_t Fnv1a64(std::string_view text);

// Seed for a named sub-actor of `seed` (e.g. one client's noisify step).
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view name);

}  // namespace pfdm

#endif  // PFDM_RNG_H_
