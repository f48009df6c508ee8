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
// Privacy accounting for (adaptive) DP-SGD: Gaussian mechanism calibration,
// amplification by subsampling and heterogeneous advanced composition.
//
// All logarithms are natural logarithms. Functions returning a noise scale
// say whether it is a standard deviation (`sigma`) or a variance
// (`variance`).
#ifndef ADPSGD_PRIVACY_ACCOUNTANT_H_
#define ADPSGD_PRIVACY_ACCOUNTANT_H_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace adpsgd {

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-5;

  // Throws DomainError unless epsilon > 0 and 0 < delta < 1.
  void Validate() const;
  bool operator==(const PrivacyBudget&) const = default;
};

// Per-iteration privacy parameters (epsilon_i, delta_i), i = 1..k.
struct PerStepPrivacy {
  std::vector<double> eps;
  std::vector<double> delta;
};

struct CompositionResult {
  double eps_tilde = 0.0;
  double delta_tilde = 0.0;
};

struct AmplifiedPrivacy {
  double eps = 0.0;
  double delta = 0.0;
};

// Parameters of mini-batch DP-SGD needed by the accountant. `delta_0` and
// `delta_prime` are resolved values; use ResolveAccountantParams to fill in
// the defaults derived from a target budget.
struct AccountantParams {
  std::int64_t n = 1;
  std::int64_t m = 1;
  std::int64_t T = 1;
  double G = 1.0;
  double delta_0 = 0.0;
  double delta_prime = 0.0;

  void Validate() const;
  double sampling_rate() const { return static_cast<double>(m) / n; }
};

// Default per-step failure probability: delta / (25 T m / n), which makes the
// 12.5 delta_0 T m / n tail bound equal delta / 2.
double DefaultDelta0(std::int64_t n, std::int64_t m, std::int64_t T,
                     double delta);

// Default composition slack: delta_0 T m / (0.2 n), inside the admissible
// window [delta_0 T m / (0.25 n), delta_0 T m / (0.1 n)].
double DefaultDeltaPrime(std::int64_t n, std::int64_t m, std::int64_t T,
                         double delta_0);

// Builds AccountantParams, filling delta_0 / delta_prime from `budget` unless
// overrides are given.
AccountantParams ResolveAccountantParams(
    std::int64_t n, std::int64_t m, std::int64_t T, double G,
    const PrivacyBudget& budget, std::optional<double> delta_0 = std::nullopt,
    std::optional<double> delta_prime = std::nullopt);

// Gaussian mechanism: sigma = sqrt(2 ln(1.25/delta)) * sensitivity / epsilon.
double GaussianSigma(double sensitivity, const PrivacyBudget& budget);

// Inverse of GaussianSigma for a fixed delta.
double GaussianEpsilon(double sensitivity, double sigma, double delta);

// Running an (eps, delta)-DP mechanism on a q-fraction subsample gives
// ((e^eps - 1) q, q delta).
AmplifiedPrivacy AmplifyBySubsampling(double eps, double delta, double q);

// 2 eps q, the upper bound on (e^eps - 1) q valid for eps <= 1.
double AmplifiedEpsilonUpperBound(double eps, double q);

// Advanced composition with heterogeneous per-step parameters. Every eps_i
// must lie in [0, 1); eps_i >= 1 raises HypothesisViolation.
CompositionResult ComposeExtended(const PerStepPrivacy& steps,
                                  double delta_prime);

// Classical advanced composition of k identical (eps0, delta0) mechanisms.
CompositionResult ComposeClassical(double eps0, double delta0, std::int64_t k,
                                   double delta_prime);

// B_delta = ln(16 T m / (n delta)) * ln(1.25 / delta).
double BDelta(std::int64_t T, std::int64_t m, std::int64_t n, double delta);

// Right-hand side of the per-iteration calibration constraint:
// n^2 eps^2 B_delta / (32 m^2 ln(1.25 / delta_0)).
double IterationConstraintThreshold(const AccountantParams& params,
                                    const PrivacyBudget& budget);

// Closed-form noise variance (16G)^2 B_delta / (n^2 eps^2) * sum_t 1/alpha_t^2
// without checking the iteration constraint.
double NoiseVarianceClosedForm(const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                               const AccountantParams& params,
                               const PrivacyBudget& budget);

// Noise variance sigma^2 that makes the run (epsilon, delta)-DP. Enforces
// alpha_t^2 * sum_s 1/alpha_s^2 >= IterationConstraintThreshold for every t
// and throws ConstraintViolation naming the first offending t (1-based).
double CalibrateNoiseVariance(const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                              const AccountantParams& params,
                              const PrivacyBudget& budget);

// Forward audit: per-step Gaussian epsilon (2G/m) sqrt(2 ln(1.25/delta_0)) /
// (alpha_t sigma), amplified by q = m/n, composed with ComposeExtended.
PrivacyBudget AuditForward(const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                           double sigma, const AccountantParams& params);

}  // namespace adpsgd

#endif  // ADPSGD_PRIVACY_ACCOUNTANT_H_
