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
#include "adpsgd/privacy_accountant.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "adpsgd/errors.h"

namespace adpsgd {
namespace {

// Neumaier-compensated sum; composition sums run over up to 1e5 terms and
// must agree with the closed form for identical entries.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double GaussianLogFactor(double delta) {
  if (!(delta > 0.0) || delta >= 1.25) {
    std::ostringstream os;
    os << "Gaussian mechanism requires 0 < delta < 1.25, got " << delta;
    throw DomainError(os.str());
  }
  return std::sqrt(2.0 * std::log(1.25 / delta));
}

void CheckDeltaPrime(double delta_prime) {
  if (!(delta_prime >= 0.0) || delta_prime >= 1.0) {
    std::ostringstream os;
    os << "delta_prime must lie in [0, 1), got " << delta_prime;
    throw DomainError(os.str());
  }
}

void CheckStepEpsilon(double eps, std::size_t index) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    std::ostringstream os;
    os << "per-step epsilon at index " << index << " must be >= 0, got " << eps;
    throw DomainError(os.str());
  }
  if (eps >= 1.0) {
    std::ostringstream os;
    os << "composition requires every per-step epsilon in (0, 1); step "
       << index << " has epsilon " << eps;
    throw HypothesisViolation(os.str());
  }
}

void CheckStepDelta(double delta, std::size_t index) {
  if (!(delta >= 0.0) || delta >= 1.0) {
    std::ostringstream os;
    os << "per-step delta at index " << index << " must lie in [0, 1), got "
       << delta;
    throw DomainError(os.str());
  }
}

// sqrt(2 * sum_sq * ln(1/delta')), treating 0 * inf as 0.
double SqrtTerm(double sum_sq, double delta_prime) {
  if (sum_sq == 0.0) return 0.0;
  if (delta_prime == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(2.0 * sum_sq * std::log(1.0 / delta_prime));
}

double SumInverseSquares(const Eigen::Ref<const Eigen::ArrayXd>& alphas) {
  CompensatedSum sum;
  for (Eigen::Index t = 0; t < alphas.size(); ++t) {
    if (!(alphas[t] > 0.0) || !std::isfinite(alphas[t])) {
      std::ostringstream os;
      os << "alpha_" << (t + 1) << " must be positive and finite, got "
         << alphas[t];
      throw DomainError(os.str());
    }
    sum.Add(1.0 / (alphas[t] * alphas[t]));
  }
  return sum.value();
}

}  // namespace

void PrivacyBudget::Validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("privacy budget epsilon must be positive, got " +
                      std::to_string(epsilon));
  }
  if (!(delta > 0.0) || delta >= 1.0) {
    throw DomainError("privacy budget delta must lie in (0, 1), got " +
                      std::to_string(delta));
  }
}

void AccountantParams::Validate() const {
  if (n < 1 || m < 1) throw DomainError("n and m must be positive");
  if (2 * m > n) {
    throw DomainError("mini-batch size m=" + std::to_string(m) +
                      " exceeds n/2 (n=" + std::to_string(n) + ")");
  }
  if (T < 1) throw DomainError("T must be at least 1");
  if (!(G > 0.0) || !std::isfinite(G)) {
    throw DomainError("gradient bound G must be positive");
  }
  if (!(delta_0 > 0.0) || delta_0 >= 1.0) {
    throw DomainError("delta_0 must lie in (0, 1)");
  }
  if (!(delta_prime > 0.0) || delta_prime >= 1.0) {
    throw DomainError("delta_prime must lie in (0, 1)");
  }
}

double DefaultDelta0(std::int64_t n, std::int64_t m, std::int64_t T,
                     double delta) {
  return delta / (25.0 * static_cast<double>(T) * static_cast<double>(m) /
                  static_cast<double>(n));
}

double DefaultDeltaPrime(std::int64_t n, std::int64_t m, std::int64_t T,
                         double delta_0) {
  return delta_0 * static_cast<double>(T) * static_cast<double>(m) /
         (0.2 * static_cast<double>(n));
}

AccountantParams ResolveAccountantParams(std::int64_t n, std::int64_t m,
                                         std::int64_t T, double G,
                                         const PrivacyBudget& budget,
                                         std::optional<double> delta_0,
                                         std::optional<double> delta_prime) {
  budget.Validate();
  AccountantParams params;
  params.n = n;
  params.m = m;
  params.T = T;
  params.G = G;
  params.delta_0 = delta_0.value_or(DefaultDelta0(n, m, T, budget.delta));
  params.delta_prime =
      delta_prime.value_or(DefaultDeltaPrime(n, m, T, params.delta_0));
  params.Validate();
  return params;
}

double GaussianSigma(double sensitivity, const PrivacyBudget& budget) {
  if (!(sensitivity >= 0.0)) throw DomainError("sensitivity must be >= 0");
  if (!(budget.epsilon > 0.0)) throw DomainError("epsilon must be positive");
  return GaussianLogFactor(budget.delta) * sensitivity / budget.epsilon;
}

double GaussianEpsilon(double sensitivity, double sigma, double delta) {
  if (!(sensitivity >= 0.0)) throw DomainError("sensitivity must be >= 0");
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  return GaussianLogFactor(delta) * sensitivity / sigma;
}

AmplifiedPrivacy AmplifyBySubsampling(double eps, double delta, double q) {
  if (!(q > 0.0) || q >= 1.0) {
    throw DomainError("sampling rate q must lie in (0, 1)");
  }
  if (!(eps >= 0.0)) throw DomainError("epsilon must be >= 0");
  if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
  return {std::expm1(eps) * q, q * delta};
}

double AmplifiedEpsilonUpperBound(double eps, double q) {
  if (eps > 1.0) {
    throw HypothesisViolation("2 eps q bound requires eps <= 1");
  }
  return 2.0 * eps * q;
}

CompositionResult ComposeExtended(const PerStepPrivacy& steps,
                                  double delta_prime) {
  if (steps.eps.size() != steps.delta.size()) {
    throw DomainError("per-step eps and delta lists differ in length");
  }
  CheckDeltaPrime(delta_prime);
  CompensatedSum sum_sq;
  CompensatedSum sum_linear;
  CompensatedSum sum_log_keep;
  for (std::size_t i = 0; i < steps.eps.size(); ++i) {
    const double e = steps.eps[i];
    CheckStepEpsilon(e, i);
    CheckStepDelta(steps.delta[i], i);
    sum_sq.Add(e * e);
    // (e^x - 1) / (e^x + 1) == tanh(x / 2)
    sum_linear.Add(e * std::tanh(0.5 * e));
    sum_log_keep.Add(std::log1p(-steps.delta[i]));
  }
  CompositionResult result;
  result.eps_tilde = SqrtTerm(sum_sq.value(), delta_prime) + sum_linear.value();
  result.delta_tilde = -std::expm1(sum_log_keep.value()) + delta_prime;
  return result;
}

CompositionResult ComposeClassical(double eps0, double delta0, std::int64_t k,
                                   double delta_prime) {
  if (k < 1) throw DomainError("k must be positive");
  CheckDeltaPrime(delta_prime);
  CheckStepEpsilon(eps0, 0);
  CheckStepDelta(delta0, 0);
  const double kd = static_cast<double>(k);
  CompositionResult result;
  result.eps_tilde = eps0 * SqrtTerm(kd, delta_prime) +
                     kd * eps0 * std::tanh(0.5 * eps0);
  result.delta_tilde = -std::expm1(kd * std::log1p(-delta0)) + delta_prime;
  return result;
}

double BDelta(std::int64_t T, std::int64_t m, std::int64_t n, double delta) {
  if (T < 1 || m < 1 || n < 1) throw DomainError("T, m, n must be positive");
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  const double arg = 16.0 * static_cast<double>(T) * static_cast<double>(m) /
                     (static_cast<double>(n) * delta);
  if (!(arg > 1.0)) {
    std::ostringstream os;
    os << "B_delta requires 16 T m / (n delta) > 1, got " << arg;
    throw DomainError(os.str());
  }
  if (!(1.25 / delta > 1.0)) throw DomainError("B_delta requires delta < 1.25");
  return std::log(arg) * std::log(1.25 / delta);
}

double IterationConstraintThreshold(const AccountantParams& params,
                                    const PrivacyBudget& budget) {
  const double n = static_cast<double>(params.n);
  const double m = static_cast<double>(params.m);
  const double b_delta = BDelta(params.T, params.m, params.n, budget.delta);
  return n * n * budget.epsilon * budget.epsilon * b_delta /
         (32.0 * m * m * std::log(1.25 / params.delta_0));
}

double NoiseVarianceClosedForm(const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                               const AccountantParams& params,
                               const PrivacyBudget& budget) {
  budget.Validate();
  params.Validate();
  if (alphas.size() != params.T) {
    throw DomainError("alpha sequence length " + std::to_string(alphas.size()) +
                      " does not match T=" + std::to_string(params.T));
  }
  const double n = static_cast<double>(params.n);
  const double b_delta = BDelta(params.T, params.m, params.n, budget.delta);
  const double scale = 16.0 * params.G;
  return scale * scale * b_delta /
         (n * n * budget.epsilon * budget.epsilon) * SumInverseSquares(alphas);
}

double CalibrateNoiseVariance(const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                              const AccountantParams& params,
                              const PrivacyBudget& budget) {
  const double variance = NoiseVarianceClosedForm(alphas, params, budget);
  const double sum_inv = SumInverseSquares(alphas);
  const double threshold = IterationConstraintThreshold(params, budget);
  for (Eigen::Index t = 0; t < alphas.size(); ++t) {
    const double lhs = alphas[t] * alphas[t] * sum_inv;
    if (lhs < threshold) {
      std::ostringstream os;
      os << "iteration constraint alpha_t^2 * sum 1/alpha_s^2 >= "
         << threshold << " fails first at t=" << (t + 1) << " (value " << lhs
         << "); increase T, m or the early alphas";
      throw ConstraintViolation(os.str(), t + 1);
    }
  }
  return variance;
}

PrivacyBudget AuditForward(const Eigen::Ref<const Eigen::ArrayXd>& alphas,
                           double sigma, const AccountantParams& params) {
  params.Validate();
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (alphas.size() != params.T) {
    throw DomainError("alpha sequence length does not match T");
  }
  const double sensitivity = 2.0 * params.G / static_cast<double>(params.m);
  const double q = params.sampling_rate();
  PerStepPrivacy steps;
  steps.eps.reserve(alphas.size());
  steps.delta.reserve(alphas.size());
  for (Eigen::Index t = 0; t < alphas.size(); ++t) {
    const double eps_t =
        GaussianEpsilon(sensitivity, alphas[t] * sigma, params.delta_0);
    const AmplifiedPrivacy amp = AmplifyBySubsampling(eps_t, params.delta_0, q);
    steps.eps.push_back(amp.eps);
    steps.delta.push_back(amp.delta);
  }
  const CompositionResult total = ComposeExtended(steps, params.delta_prime);
  return {total.eps_tilde, total.delta_tilde};
}

}  // namespace adpsgd
