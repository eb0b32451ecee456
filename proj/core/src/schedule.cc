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


#include "pfdm/schedule.h"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "pfdm/errors.h"

namespace pfdm {

std::string ToString(SigmaMode mode) {
  return mode == SigmaMode::kBeta ? "beta" : "posterior";
}

SigmaMode ParseSigmaMode(const std::string& text) {
  if (text == "beta") return SigmaMode::kBeta;
  if (text == "posterior") return SigmaMode::kPosterior;
  throw InvalidArgument("unknown sigma mode '" + text + "'");
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, SigmaMode sigma_mode)
    : betas_(std::move(betas)), sigma_mode_(sigma_mode) {
  if (betas_.empty()) throw InvalidArgument("NoiseSchedule: T must be >= 1");
  const std::size_t n = betas_.size();
  alpha_bars_.resize(n);
  posterior_vars_.resize(n);
  sigmas_.resize(n);
  double prev = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw InvalidArgument("NoiseSchedule: every beta must lie in (0, 1)");
    }
    const double abar = prev * (1.0 - b);
    alpha_bars_[i] = abar;
    // prev is abar_{t-1}, equal to 1 at t = 1 so the variance vanishes.
    posterior_vars_[i] = (1.0 - prev) / (1.0 - abar) * b;
    sigmas_[i] = sigma_mode_ == SigmaMode::kBeta ? std::sqrt(b)
                                                 : std::sqrt(posterior_vars_[i]);
    prev = abar;
  }
}

std::size_t NoiseSchedule::Slot(int t) const {
  if (t < 1 || t > T()) {
    throw InvalidArgument("step " + std::to_string(t) + " outside [1, " +
                          std::to_string(T()) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bars_.at(Slot(t));
}

ScheduleFingerprint NoiseSchedule::Fingerprint() const {
  std::vector<unsigned char> bytes;
  bytes.reserve(betas_.size() * 8);
  for (double b : betas_) {
    const auto bits = std::bit_cast<std::uint64_t>(b);
    for (int k = 0; k < 8; ++k) {
      bytes.push_back(static_cast<unsigned char>((bits >> (8 * k)) & 0xff));
    }
  }
  ScheduleFingerprint out{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(),
             nullptr);
  return out;
}

void NoiseSchedule::WriteTable(std::ostream& out) const {
  out << "# t beta alpha_bar sigma\n";
  out << std::setprecision(17);
  for (int t = 1; t <= T(); ++t) {
    out << t << ' ' << beta(t) << ' ' << alpha_bar(t) << ' ' << sigma(t)
        << '\n';
  }
}

NoiseSchedule NoiseSchedule::ReadTable(std::istream& in, SigmaMode sigma_mode) {
  std::vector<double> betas;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    int t = 0;
    double beta = 0, abar = 0, sigma = 0;
    if (!(row >> t >> beta >> abar >> sigma)) {
      throw FormatError("schedule table: malformed row '" + line + "'");
    }
    if (t != static_cast<int>(betas.size()) + 1) {
      throw FormatError("schedule table: steps must be consecutive from 1");
    }
    betas.push_back(beta);
  }
  return NoiseSchedule(std::move(betas), sigma_mode);
}

NoiseSchedule MakeLinearSchedule(int T, double beta_start, double beta_end,
                                 SigmaMode sigma_mode) {
  if (T < 1) throw InvalidArgument("linear schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw InvalidArgument(
        "linear schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    betas[t - 1] = T == 1 ? beta_start
                          : beta_start + (t - 1) * (beta_end - beta_start) /
                                             static_cast<double>(T - 1);
  }
  return NoiseSchedule(std::move(betas), sigma_mode);
}

std::string FingerprintHex(const ScheduleFingerprint& fp) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (auto b : fp) os << std::setw(2) << static_cast<int>(b);
  return os.str();
}

}  // namespace pfdm
