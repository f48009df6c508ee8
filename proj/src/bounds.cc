// Copyright 2026 The ADP-SGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "adpsgd/bounds.h"

#include <cmath>
#include <sstream>

#include "adpsgd/errors.h"
#include "adpsgd/privacy_accountant.h"
#include "adpsgd/schedules.h"

namespace adpsgd {
namespace {

double Sq(double x) { return x * x; }

double BDeltaOf(const BoundInputs& in) {
  return BDelta(in.T, in.m, in.n, in.delta);
}

// n^2 eps^2
double PrivacyDenominator(const BoundInputs& in) {
  return Sq(static_cast<double>(in.n)) * Sq(in.epsilon);
}

void RequireT(const BoundInputs& in, double min_T, const char* what) {
  if (static_cast<double>(in.T) < min_T) {
    std::ostringstream os;
    os << what << " requires T >= " << min_T << ", got T=" << in.T;
    throw HypothesisViolation(os.str());
  }
}

}  // namespace

double PrivacyCoefficient(const BoundInputs& in) {
  return in.eta * in.L * in.d * Sq(16.0 * in.G) * BDeltaOf(in) /
         (2.0 * PrivacyDenominator(in));
}

double UtilityBoundGeneral(const BoundInputs& in,
                           const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                           const Eigen::Ref<const Eigen::ArrayXd>& bs,
                           double grad_sq_over_b2_sum) {
  if (alphas.size() != in.T || bs.size() != in.T) {
    throw DomainError("alpha and b sequences must have length T");
  }
  const double w_opt = in.D_F / in.eta + 0.5 * in.eta * in.L * grad_sq_over_b2_sum;
  const double privacy = PrivacyCoefficient(in) * MFunctional(alphas, bs);
  return (w_opt + privacy) / bs.inverse().sum();
}

double BT(const BoundInputs& in) {
  return std::log1p(static_cast<double>(in.T) * in.c / in.a);
}

double WOptDecay(const BoundInputs& in) {
  return std::sqrt(in.c) *
         (in.D_F / in.eta + in.eta * Sq(in.G) * in.L * BT(in) / (2.0 * in.c));
}

double BoundDecayPrivacyTerm(const BoundInputs& in, Variant variant) {
  const double common = in.eta * in.d * in.L * Sq(16.0 * in.G) * BDeltaOf(in) *
                        std::sqrt(static_cast<double>(in.T)) /
                        (PrivacyDenominator(in) * std::sqrt(in.c));
  return variant == Variant::kAdp ? 0.5 * common : common * BT(in);
}

double BoundDecay(const BoundInputs& in, Variant variant) {
  RequireT(in, 5.0 + 4.0 * in.a / in.c, "polynomial-decay bound");
  return WOptDecay(in) / std::sqrt(static_cast<double>(in.T - 1)) +
         BoundDecayPrivacyTerm(in, variant);
}

double WOptAdaptive(const BoundInputs& in) {
  const double log_term =
      1.0 + std::log(static_cast<double>(in.T) * (Sq(in.G) + Sq(in.nu)) / Sq(in.b0) + 1.0);
  return 2.0 * in.G * (2.0 * in.G + 0.5 * in.eta * in.L) * log_term +
         2.0 * in.G * in.D_F / in.eta;
}

double BoundAdaptivePrivacyTerm(const BoundInputs& in, Variant variant) {
  const double common = in.G * in.G * in.G * in.eta * in.d * in.L * BDeltaOf(in) *
                        std::sqrt(static_cast<double>(in.T)) /
                        (PrivacyDenominator(in) * in.nu);
  if (variant == Variant::kAdp) return 128.0 * common;
  return 32.0 * common * std::log1p(static_cast<double>(in.T) * in.nu / Sq(in.b0));
}

double BoundAdaptive(const BoundInputs& in, Variant variant) {
  RequireT(in, 5.0 + 4.0 * Sq(in.b0) / Sq(in.G), "adaptive-stepsize bound");
  return WOptAdaptive(in) / std::sqrt(static_cast<double>(in.T - 1)) +
         BoundAdaptivePrivacyTerm(in, variant);
}

double BoundConstant(const BoundInputs& in) {
  const double T = static_cast<double>(in.T);
  return 2.0 * in.D_F / (in.eta * T) +
         in.eta * in.L * Sq(in.G) *
             (1.0 + in.d * 256.0 * BDeltaOf(in) * T / PrivacyDenominator(in));
}

SumBounds SumPowerBounds(double a1, double a2, double p, std::int64_t T) {
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw DomainError("a1 and a2 must be positive");
  if (!(p > 0.0) || p > 1.0) throw DomainError("p must lie in (0, 1]");
  if (T < 1) throw DomainError("T must be >= 1");
  const double Td = static_cast<double>(T);
  const double r = a1 / a2;
  SumBounds out;
  if (p == 1.0) {
    out.upper = std::log1p(Td * a2 / a1) / a2;
    out.lower = std::log1p(Td / (r + 1.0)) / a2;
  } else {
    const double scale = 1.0 / ((1.0 - p) * std::pow(a2, p));
    out.upper = scale * (std::pow(r + Td, 1.0 - p) - std::pow(r, 1.0 - p));
    out.lower = scale * (std::pow(r + 1.0 + Td, 1.0 - p) - std::pow(r + 1.0, 1.0 - p));
  }
  return out;
}

std::pair<double, double> LogsumBound(std::span<const double> seq) {
  if (seq.empty()) throw DomainError("sequence must be non-empty");
  if (!(seq[0] > 1.0)) throw DomainError("first element must exceed 1");
  double prefix = 0.0;
  double lhs = 0.0;
  for (double a : seq) {
    if (!(a >= 0.0)) throw DomainError("sequence entries must be non-negative");
    prefix += a;
    lhs += a / prefix;
  }
  return {lhs, std::log(prefix) + 1.0};
}

}  // namespace adpsgd
