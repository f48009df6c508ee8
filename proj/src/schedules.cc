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
#include "adpsgd/schedules.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adpsgd/errors.h"

namespace adpsgd {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void RequirePositive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be positive and finite, got " << value;
    throw DomainError(os.str());
  }
}

}  // namespace

double GradientBoost::At(std::int64_t t) const {
  if (!sequence.empty()) {
    const auto i = static_cast<std::size_t>(
        std::min<std::int64_t>(t, static_cast<std::int64_t>(sequence.size()) - 1));
    return sequence[i];
  }
  return std::max(beta / static_cast<double>((t % period) + 1), 1.0);
}

void Validate(const StepsizeSchedule& schedule) {
  std::visit(Overloaded{
                 [](const ConstantStep& s) { RequirePositive(s.b, "b"); },
                 [](const PolynomialDecayStep& s) {
                   RequirePositive(s.a, "a");
                   RequirePositive(s.c, "c");
                 },
                 [](const AdaGradNormStep& s) {
                   RequirePositive(s.b0, "b0");
                   RequirePositive(s.nu, "nu");
                   if (s.boost) {
                     RequirePositive(s.boost->beta, "beta");
                     if (s.boost->period < 1) {
                       throw DomainError("boost period must be >= 1");
                     }
                     for (double v : s.boost->sequence) {
                       if (!(v >= 1.0)) {
                         throw DomainError("boost sequence entries must be >= 1");
                       }
                     }
                   }
                 },
             },
             schedule);
}

void Validate(const NoiseScaleSchedule& schedule) {
  std::visit(Overloaded{
                 [](const ConstantOneNoise&) {},
                 [](const SqrtOfBNoise&) {},
                 [](const PolynomialQuarterNoise& s) {
                   RequirePositive(s.b0_sq, "b0_sq");
                   RequirePositive(s.C, "C");
                 },
             },
             schedule);
}

void ValidateAgainstGradientBound(const StepsizeSchedule& schedule, double G) {
  Validate(schedule);
  if (const auto* s = std::get_if<AdaGradNormStep>(&schedule)) {
    if (s->nu > G * G) {
      std::ostringstream os;
      os << "nu=" << s->nu << " exceeds G^2=" << G * G;
      throw DomainError(os.str());
    }
  }
}

ScheduleState InitialState(const StepsizeSchedule& schedule) {
  Validate(schedule);
  ScheduleState state;
  state.t = 0;
  state.alpha = 1.0;
  state.b = std::visit(
      Overloaded{
          [](const ConstantStep& s) { return s.b; },
          [](const PolynomialDecayStep& s) { return std::sqrt(s.a); },
          [](const AdaGradNormStep& s) { return s.b0; },
      },
      schedule);
  return state;
}

double NextB(const StepsizeSchedule& schedule, const ScheduleState& state,
             double grad_norm_sq) {
  return std::visit(
      Overloaded{
          [&](const ConstantStep& s) { return s.b; },
          [&](const PolynomialDecayStep& s) {
            return std::sqrt(s.a + s.c * static_cast<double>(state.t + 1));
          },
          [&](const AdaGradNormStep& s) {
            const double beta = s.boost ? s.boost->At(state.t) : 1.0;
            return std::sqrt(state.b * state.b +
                             std::max(beta * grad_norm_sq, s.nu));
          },
      },
      schedule);
}

double NextAlpha(const NoiseScaleSchedule& schedule, const ScheduleState& state,
                 double b_next) {
  return std::visit(
      Overloaded{
          [](const ConstantOneNoise&) { return 1.0; },
          [&](const SqrtOfBNoise&) { return std::sqrt(b_next); },
          [&](const PolynomialQuarterNoise& s) {
            return std::pow(s.b0_sq + static_cast<double>(state.t + 1) * s.C,
                            0.25);
          },
      },
      schedule);
}

Eigen::ArrayXd PrecomputeBs(const StepsizeSchedule& schedule, std::int64_t T) {
  Validate(schedule);
  if (T < 0) throw DomainError("T must be non-negative");
  if (IsAdaptive(schedule)) {
    throw IncompatibleSchedule(
        "AdaGrad-Norm denominators depend on the data and cannot be "
        "precomputed");
  }
  Eigen::ArrayXd bs(T);
  ScheduleState state = InitialState(schedule);
  for (std::int64_t t = 0; t < T; ++t) {
    bs[t] = NextB(schedule, state, 0.0);
    state.b = bs[t];
    state.t = t + 1;
  }
  return bs;
}

Eigen::ArrayXd PrecomputeAlphas(const NoiseScaleSchedule& noise,
                                const StepsizeSchedule& step, std::int64_t T) {
  Validate(noise);
  Validate(step);
  if (T < 0) throw DomainError("T must be non-negative");
  if (std::holds_alternative<SqrtOfBNoise>(noise) && IsAdaptive(step)) {
    throw IncompatibleSchedule(
        "alpha_t^2 = b_t needs b_t in advance; use the polynomial-quarter "
        "noise schedule with AdaGrad-Norm");
  }
  if (std::holds_alternative<SqrtOfBNoise>(noise)) {
    return PrecomputeBs(step, T).sqrt();
  }
  Eigen::ArrayXd alphas(T);
  ScheduleState state;
  for (std::int64_t t = 0; t < T; ++t) {
    state.t = t;
    alphas[t] = NextAlpha(noise, state, 1.0);
  }
  return alphas;
}

bool IsAdaptive(const StepsizeSchedule& schedule) {
  return std::holds_alternative<AdaGradNormStep>(schedule);
}

std::string Describe(const StepsizeSchedule& schedule) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const ConstantStep& s) { os << "constant(b=" << s.b << ")"; },
                 [&](const PolynomialDecayStep& s) {
                   os << "poly(a=" << s.a << ",c=" << s.c << ")";
                 },
                 [&](const AdaGradNormStep& s) {
                   os << "adagrad(b0=" << s.b0 << ",nu=" << s.nu;
                   if (s.boost) os << ",beta=" << s.boost->beta;
                   os << ")";
                 },
             },
             schedule);
  return os.str();
}

std::string Describe(const NoiseScaleSchedule& schedule) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const ConstantOneNoise&) { os << "one"; },
                 [&](const SqrtOfBNoise&) { os << "sqrt_b"; },
                 [&](const PolynomialQuarterNoise& s) {
                   os << "poly_quarter(b0_sq=" << s.b0_sq << ",C=" << s.C << ")";
                 },
             },
             schedule);
  return os.str();
}

}  // namespace adpsgd
