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
// Stepsize denominators b_t and noise scales alpha_t.
//
// Indexing: schedules emit b_1..b_T and alpha_1..alpha_T. Iteration
// t = 0..T-1 consumes b_{t+1} and alpha_{t+1}, i.e. element t of the
// precomputed arrays.
#ifndef ADPSGD_SCHEDULES_H_
#define ADPSGD_SCHEDULES_H_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace adpsgd {

struct ConstantStep {
  double b = 1.0;
  bool operator==(const ConstantStep&) const = default;
};

// b_t = (a + c t)^{1/2}
struct PolynomialDecayStep {
  double a = 20.0;
  double c = 1.0;
  bool operator==(const PolynomialDecayStep&) const = default;
};

// Multiplier beta_t >= 1 applied to the squared gradient norm in the
// AdaGrad-Norm update. The cyclic preset is max(beta / ((t mod period) + 1), 1);
// a non-empty `sequence` overrides it (indexed by t, last value repeated).
struct GradientBoost {
  double beta = 1.0;
  std::int64_t period = 195;
  std::vector<double> sequence;

  double At(std::int64_t t) const;
  bool operator==(const GradientBoost&) const = default;
};

// b_{t+1}^2 = b_t^2 + max(beta_t g^2, nu)
struct AdaGradNormStep {
  double b0 = 1.0;
  double nu = 1e-5;
  std::optional<GradientBoost> boost;
  bool operator==(const AdaGradNormStep&) const = default;
};

using StepsizeSchedule =
    std::variant<ConstantStep, PolynomialDecayStep, AdaGradNormStep>;

// alpha_t = 1 (plain DP-SGD).
struct ConstantOneNoise {
  bool operator==(const ConstantOneNoise&) const = default;
};

// alpha_t^2 = b_t.
struct SqrtOfBNoise {
  bool operator==(const SqrtOfBNoise&) const = default;
};

// alpha_t = (b0_sq + t C)^{1/4}, the precomputable stand-in for alpha_t^2 = b_t
// under AdaGrad-Norm.
struct PolynomialQuarterNoise {
  double b0_sq = 1.0;
  double C = 1e-3;
  bool operator==(const PolynomialQuarterNoise&) const = default;
};

using NoiseScaleSchedule =
    std::variant<ConstantOneNoise, SqrtOfBNoise, PolynomialQuarterNoise>;

struct ScheduleState {
  std::int64_t t = 0;
  double b = 1.0;
  double alpha = 1.0;
};

// Throws DomainError if any parameter is not strictly positive.
void Validate(const StepsizeSchedule& schedule);
void Validate(const NoiseScaleSchedule& schedule);

// nu <= G^2 is required by the adaptive bounds when G is known.
void ValidateAgainstGradientBound(const StepsizeSchedule& schedule, double G);

// b_0 for the schedule (sqrt(a) for polynomial decay), alpha_0 = 1.
ScheduleState InitialState(const StepsizeSchedule& schedule);

// phi_1: b_{t+1} from the state at iteration t and the squared norm of the
// released gradient. Non-adaptive schedules ignore `grad_norm_sq`.
double NextB(const StepsizeSchedule& schedule, const ScheduleState& state,
             double grad_norm_sq);

// phi_2 in on-the-fly form: alpha_{t+1} from the state at iteration t and
// the freshly computed b_{t+1}.
double NextAlpha(const NoiseScaleSchedule& schedule, const ScheduleState& state,
                 double b_next);

// b_1..b_T for schedules that do not depend on data. Throws
// IncompatibleSchedule for AdaGradNorm.
Eigen::ArrayXd PrecomputeBs(const StepsizeSchedule& schedule, std::int64_t T);

// alpha_1..alpha_T fixed before training. SqrtOfB requires a data-independent
// stepsize schedule.
Eigen::ArrayXd PrecomputeAlphas(const NoiseScaleSchedule& noise,
                                const StepsizeSchedule& step, std::int64_t T);

bool IsAdaptive(const StepsizeSchedule& schedule);

std::string Describe(const StepsizeSchedule& schedule);
std::string Describe(const NoiseScaleSchedule& schedule);

// M({alpha}, {b}) = sum (alpha_t / b_t)^2 * sum 1 / alpha_t^2.
template <typename DerivedA, typename DerivedB>
double MFunctional(const Eigen::ArrayBase<DerivedA>& alphas,
                   const Eigen::ArrayBase<DerivedB>& bs) {
  eigen_assert(alphas.size() == bs.size());
  return (alphas / bs).square().sum() * alphas.square().inverse().sum();
}

// Minimum of M over alpha, attained at alpha_t^2 = b_t: (sum 1/b_t)^2.
template <typename Derived>
double MAdp(const Eigen::ArrayBase<Derived>& bs) {
  const double s = bs.inverse().sum();
  return s * s;
}

// M at alpha = 1: T * sum 1/b_t^2.
template <typename Derived>
double MDp(const Eigen::ArrayBase<Derived>& bs) {
  return static_cast<double>(bs.size()) * bs.square().inverse().sum();
}

}  // namespace adpsgd

#endif  // ADPSGD_SCHEDULES_H_
