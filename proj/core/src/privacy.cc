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


#include "pfdm/privacy.h"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "pfdm/errors.h"

namespace pfdm {

std::string ToString(BoundMode mode) {
  return mode == BoundMode::kPerSample ? "per_sample" : "per_coordinate";
}

BoundMode ParseBoundMode(const std::string& text) {
  if (text == "per_sample") return BoundMode::kPerSample;
  if (text == "per_coordinate") return BoundMode::kPerCoordinate;
  throw InvalidArgument("unknown bound mode '" + text + "'");
}

void PrivacyQuery::Validate(const NoiseSchedule& schedule) const {
  if (t0 < 1 || t0 > schedule.T()) {
    throw InvalidArgument("privacy: t0 must lie in [1, T]");
  }
  if (!(bound >= 0.0) || !std::isfinite(bound)) {
    throw InvalidArgument("privacy: bound must be a finite value >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("privacy: delta must lie in (0, 1)");
  }
  if (group_size < 1) throw InvalidArgument("privacy: group size must be >= 1");
}

double RdpTau(int t0, double bound, const NoiseSchedule& schedule) {
  if (bound < 0.0) throw InvalidArgument("privacy: bound must be >= 0");
  const double a = schedule.alpha_bar(t0);
  return 2.0 * a * bound * bound / (1.0 - a);
}

double RdpToDp(double gamma, double rho, double delta) {
  if (!(gamma > 1.0)) throw InvalidArgument("RDP order gamma must be > 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("delta must lie in (0, 1)");
  }
  return rho + std::log(1.0 / delta) / (gamma - 1.0);
}

namespace {

PrivacyReport SinglePoint(const PrivacyQuery& query,
                          const NoiseSchedule& schedule) {
  query.Validate(schedule);
  PrivacyReport r;
  r.query = query;
  r.alpha_bar = schedule.alpha_bar(query.t0);
  r.tau = RdpTau(query.t0, query.bound, schedule);
  const double log_inv_delta = std::log(1.0 / query.delta);
  if (r.tau > 0.0) {
    r.gamma_star = 1.0 + std::sqrt(log_inv_delta / r.tau);
    r.epsilon = r.tau + 2.0 * std::sqrt(r.tau * log_inv_delta);
  } else {
    r.gamma_star = std::numeric_limits<double>::infinity();
    r.epsilon = 0.0;
  }
  r.epsilon1 = r.tau;
  r.epsilon2 = std::sqrt(8.0 * query.bound * query.bound * r.alpha_bar /
                         (1.0 - r.alpha_bar));
  return r;
}

}  // namespace

PrivacyReport ReleaseEpsilon(const PrivacyQuery& query,
                              const NoiseSchedule& schedule) {
  if (query.group_size != 1) {
    throw InvalidArgument("single-point accounting requires group size 1");
  }
  return SinglePoint(query, schedule);
}

double GroupEpsilonFromParts(int k, double epsilon1, double epsilon2) {
  if (k < 1) throw InvalidArgument("group size must be >= 1");
  return k * epsilon1 + k * epsilon2 * std::sqrt(5.0 + k * (epsilon1 + epsilon2));
}

PrivacyReport GroupEpsilon(const PrivacyQuery& query,
                           const NoiseSchedule& schedule) {
  if (query.mode != BoundMode::kPerCoordinate) {
    throw InvalidArgument(
        "group accounting applies to per-coordinate bounds only");
  }
  PrivacyReport r = SinglePoint(query, schedule);
  r.epsilon = GroupEpsilonFromParts(query.group_size, r.epsilon1, r.epsilon2);
  return r;
}

PrivacyReport Account(const PrivacyQuery& query, const NoiseSchedule& schedule) {
  return query.group_size > 1 ? GroupEpsilon(query, schedule)
                              : ReleaseEpsilon(query, schedule);
}

T0Search MinT0ForEpsilon(double target_epsilon, double bound, double delta,
                         const NoiseSchedule& schedule) {
  if (!(target_epsilon > 0.0)) {
    throw InvalidArgument("target epsilon must be > 0");
  }
  auto eps_at = [&](int t0) {
    PrivacyQuery q;
    q.t0 = t0;
    q.bound = bound;
    q.delta = delta;
    return ReleaseEpsilon(q, schedule).epsilon;
  };
  T0Search out;
  const double at_end = eps_at(schedule.T());
  if (at_end > target_epsilon) {
    out.outcome = T0Search::Outcome::kUnreachable;
    out.epsilon = at_end;
    return out;
  }
  int lo = 1, hi = schedule.T();  // eps(hi) <= target
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (eps_at(mid) <= target_epsilon) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  out.outcome = T0Search::Outcome::kFound;
  out.t0 = lo;
  out.epsilon = eps_at(lo);
  return out;
}

std::vector<BudgetRow> BudgetSweep(const NoiseSchedule& schedule, double bound,
                                   double delta, BoundMode mode) {
  std::vector<BudgetRow> rows;
  rows.reserve(static_cast<std::size_t>(schedule.T()));
  for (int t0 = 1; t0 <= schedule.T(); ++t0) {
    PrivacyQuery q;
    q.t0 = t0;
    q.bound = bound;
    q.delta = delta;
    q.mode = mode;
    const PrivacyReport r = ReleaseEpsilon(q, schedule);
    rows.push_back({t0, r.alpha_bar, r.tau, r.gamma_star, r.epsilon});
  }
  return rows;
}

void WriteBudgetCsv(const std::vector<BudgetRow>& rows, std::ostream& out) {
  out << "t0,alpha_bar,tau,gamma_star,epsilon\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.t0 << ',' << r.alpha_bar << ',' << r.tau << ',';
    if (std::isinf(r.gamma_star)) {
      out << "inf";
    } else {
      out << r.gamma_star;
    }
    out << ',' << r.epsilon << '\n';
  }
}

void WriteReport(const PrivacyReport& r, std::ostream& out) {
  const auto& q = r.query;
  out << "privacy report\n"
      << "  t0            " << q.t0 << '\n'
      << "  bound         " << q.bound << " (" << ToString(q.mode) << ")\n"
      << "  delta         " << q.delta << '\n'
      << "  group size    " << q.group_size << '\n'
      << "  alpha_bar     " << std::setprecision(10) << r.alpha_bar << '\n'
      << "  tau           " << r.tau << '\n'
      << "  gamma*        ";
  if (std::isinf(r.gamma_star)) {
    out << "inf (tau = 0)";
  } else {
    out << r.gamma_star;
  }
  out << '\n'
      << "  epsilon1      " << r.epsilon1 << '\n'
      << "  epsilon2      " << r.epsilon2 << '\n'
      << "  epsilon       " << std::setprecision(6) << r.epsilon << '\n';
}

}  // namespace pfdm
