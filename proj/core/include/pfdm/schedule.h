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


#ifndef PFDM_SCHEDULE_H_
#define PFDM_SCHEDULE_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pfdm {

// Which variance the reverse sampler injects at step t.
enum class SigmaMode {
  kBeta,       // sigma_t^2 = beta_t
  kPosterior,  // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t
};

std::string ToString(SigmaMode mode);
SigmaMode ParseSigmaMode(const std::string& text);

using ScheduleFingerprint = std::array<std::uint8_t, 32>;

// Discrete DDPM noise schedule. All accessors are 1-based in t to match the
// usual t = 1..T indexing; alpha_bar(0) is defined as 1.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas, SigmaMode sigma_mode);

  int T() const { return static_cast<int>(betas_.size()); }
  SigmaMode sigma_mode() const { return sigma_mode_; }

  double beta(int t) const { return betas_.at(Slot(t)); }
  double alpha_bar(int t) const;
  double posterior_var(int t) const { return posterior_vars_.at(Slot(t)); }
  double sigma(int t) const { return sigmas_.at(Slot(t)); }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  const std::vector<double>& posterior_vars() const { return posterior_vars_; }
  const std::vector<double>& sigmas() const { return sigmas_; }

  // SHA-256 over the little-endian IEEE-754 bytes of the beta table.
  ScheduleFingerprint Fingerprint() const;

  // Plain-text table "t beta alpha_bar sigma", 17 significant digits.
  void WriteTable(std::ostream& out) const;
  static NoiseSchedule ReadTable(std::istream& in, SigmaMode sigma_mode);

 private:
  std::size_t Slot(int t) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
  std::vector<double> posterior_vars_;
  std::vector<double> sigmas_;
  SigmaMode sigma_mode_;
};

// beta_t = beta_start + (t-1) (beta_end - beta_start) / (T-1).
NoiseSchedule MakeLinearSchedule(int T, double beta_start, double beta_end,
                                 SigmaMode sigma_mode = SigmaMode::kBeta);

std::string FingerprintHex(const ScheduleFingerprint& fp);

}  // namespace pfdm

#endif  // PFDM_SCHEDULE_H_
