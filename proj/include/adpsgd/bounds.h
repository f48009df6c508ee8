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
//
// Closed-form utility bounds on min_t E||grad F(theta_t)||^2 for DP-SGD and
// ADP-SGD, plus the summation lemmas they are built from.
#ifndef ADPSGD_BOUNDS_H_
#define ADPSGD_BOUNDS_H_

#include <cstdint>
#include <span>
#include <utility>

#include <Eigen/Core>

namespace adpsgd {

struct BoundInputs {
  double G = 1.0;    // gradient bound (or clipping radius)
  double L = 1.0;    // smoothness
  double D_F = 1.0;  // F(theta_0) - F*
  double eta = 1.0;
  double d = 1.0;    // parameter dimension
  std::int64_t n = 1000;
  std::int64_t m = 1;
  double epsilon = 1.0;
  double delta = 1e-5;
  std::int64_t T = 1000;
  // polynomial decay b_t = (a + c t)^{1/2}
  double a = 20.0;
  double c = 1.0;
  // AdaGrad-Norm
  double b0 = 1.0;
  double nu = 1e-5;
  double C = 1e-3;
};

enum class Variant { kAdp, kDp };

// d (16G)^2 B_delta / (2 n^2 eps^2) * eta L, the coefficient of M in the
// general utility bound.
double PrivacyCoefficient(const BoundInputs& in);

// (1 / sum_t b_t^{-1}) (W_opt + PrivacyCoefficient * M(alpha, b)) with
// W_opt = D_F / eta + (eta L / 2) * grad_sq_over_b2_sum.
double UtilityBoundGeneral(const BoundInputs& in,
                           const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                           const Eigen::Ref<const Eigen::ArrayXd>& bs,
                           double grad_sq_over_b2_sum);

// B_T = ln(1 + T c / a).
double BT(const BoundInputs& in);

// W_opt^decay = sqrt(c) (D_F / eta + eta G^2 L B_T / (2c)).
double WOptDecay(const BoundInputs& in);

// Polynomially decaying stepsize b_t = (a + ct)^{1/2}. Requires
// T >= 5 + 4a/c (HypothesisViolation otherwise).
double BoundDecay(const BoundInputs& in, Variant variant);
double BoundDecayPrivacyTerm(const BoundInputs& in, Variant variant);

// W_opt^adap = 2G(2G + eta L / 2)(1 + ln(T (G^2 + nu^2) / b0^2 + 1)) + 2G D_F / eta.
double WOptAdaptive(const BoundInputs& in);

// AdaGrad-Norm stepsizes; ADP uses alpha_t = (b0^2 + tC)^{1/4}. Requires
// T >= 5 + 4 b0^2 / G^2.
double BoundAdaptive(const BoundInputs& in, Variant variant);
double BoundAdaptivePrivacyTerm(const BoundInputs& in, Variant variant);

// DP-SGD with constant stepsize eta:
// 2 D_F / (eta T) + eta L G^2 (1 + d 16^2 B_delta T / (n^2 eps^2)).
double BoundConstant(const BoundInputs& in);

struct SumBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Integral sandwich for sum_{t=1}^T (a1 + a2 t)^{-p}, p in (0, 1].
SumBounds SumPowerBounds(double a1, double a2, double p, std::int64_t T);

// lhs = sum_l a_l / sum_{i<=l} a_i and rhs = ln(sum a_i) + 1; requires
// a_1 > 1 and a_i >= 0.
std::pair<double, double> LogsumBound(std::span<const double> seq);

}  // namespace adpsgd

#endif  // ADPSGD_BOUNDS_H_
