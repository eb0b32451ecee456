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


#ifndef PFDM_PRIVACY_H_
#define PFDM_PRIVACY_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "pfdm/schedule.h"

namespace pfdm {

// Local-DP accounting for releasing x~ = sqrt(abar_t0) x + sqrt(1 - abar_t0) z
// once per training point. The mechanism is Gaussian with l2 sensitivity
// 2 sqrt(abar_t0) * bound and noise variance 1 - abar_t0, hence
// (gamma, gamma * tau)-RDP with tau = 2 abar_t0 bound^2 / (1 - abar_t0).
// All logarithms are natural.

enum class BoundMode {
  kPerSample,      // bound is the whole-sample l2 norm C
  kPerCoordinate,  // bound is the per-coordinate maximum c
};

std::string ToString(BoundMode mode);
BoundMode ParseBoundMode(const std::string& text);

struct PrivacyQuery {
  int t0 = 1;
  double bound = 1.0;
  BoundMode mode = BoundMode::kPerSample;
  double delta = 1e-5;
  int group_size = 1;

  void Validate(const NoiseSchedule& schedule) const;
};

struct PrivacyReport {
  PrivacyQuery query;
  double alpha_bar = 0.0;
  double tau = 0.0;
  // +infinity when tau == 0 (any order works, epsilon is 0).
  double gamma_star = 0.0;
  double epsilon = 0.0;
  // epsilon1 = tau, epsilon2 = sqrt(8 bound^2 abar / (1 - abar)).
  double epsilon1 = 0.0;
  double epsilon2 = 0.0;
};

double RdpTau(int t0, double bound, const NoiseSchedule& schedule);

// (gamma, rho)-RDP => (rho + ln(1/delta) / (gamma - 1), delta)-DP.
double RdpToDp(double gamma, double rho, double delta);

// Single-point guarantee with the optimal order
// gamma* = 1 + sqrt(ln(1/delta) / tau): epsilon = tau + 2 sqrt(tau ln(1/delta)).
PrivacyReport ReleaseEpsilon(const PrivacyQuery& query,
                              const NoiseSchedule& schedule);

// Joint guarantee for k coordinates:
// epsilon = k e1 + k e2 sqrt(5 + k (e1 + e2)). Requires per-coordinate mode.
PrivacyReport GroupEpsilon(const PrivacyQuery& query,
                           const NoiseSchedule& schedule);
double GroupEpsilonFromParts(int k, double epsilon1, double epsilon2);

// Dispatches to GroupEpsilon when group_size > 1.
PrivacyReport Account(const PrivacyQuery& query, const NoiseSchedule& schedule);

struct T0Search {
  enum class Outcome { kFound, kUnreachable };
  Outcome outcome = Outcome::kUnreachable;
  int t0 = 0;            // valid when kFound
  double epsilon = 0.0;  // epsilon at t0 (kFound) or at t0 = T (kUnreachable)
};

// Smallest t0 whose single-point epsilon is <= target.
T0Search MinT0ForEpsilon(double target_epsilon, double bound, double delta,
                         const NoiseSchedule& schedule);

struct BudgetRow {
  int t0;
  double alpha_bar;
  double tau;
  double gamma_star;
  double epsilon;
};

std::vector<BudgetRow> BudgetSweep(const NoiseSchedule& schedule, double bound,
                                   double delta, BoundMode mode);

// CSV with header t0,alpha_bar,tau,gamma_star,epsilon (17 significant digits;
// gamma_star of an infinite order is written as "inf").
void WriteBudgetCsv(const std::vector<BudgetRow>& rows, std::ostream& out);

void WriteReport(const PrivacyReport& report, std::ostream& out);

}  // namespace pfdm

#endif  // PFDM_PRIVACY_H_
