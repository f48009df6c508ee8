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
#include <random>

#include <gtest/gtest.h>

#include "adpsgd/errors.h"
#include "adpsgd/schedules.h"

namespace adpsgd {
namespace {

// Constants below were evaluated with 40-digit arithmetic (mpmath).
constexpr double kSigmaDelta2 = 9.689610525210778842517;         // 2 sqrt(2 ln 125000)
constexpr double kAmplified = 0.001051709180756476248117;        // (e^0.1 - 1) * 0.01
constexpr double kComposedK4 = 0.3028260624577709986396922;      // sqrt(0.08) + 0.4 tanh(0.05)
constexpr double kBDelta100 = 140.6324828669613220977663;        // ln(160000) ln(125000)
constexpr double kVarianceAlphaOne = 3.600191561394209845702819; // 256 B 100 / 1e6
constexpr double kVarianceSqrtB = 2.353508281405465686075478;    // alpha_t^2 = sqrt(20 + t)

double RelErr(double got, double want) { return std::abs(got - want) / std::abs(want); }

TEST(GaussianSigmaTest, ZeroSensitivityNeedsNoNoise) {
  EXPECT_EQ(GaussianSigma(0.0, {0.5, 1e-5}), 0.0);
}

TEST(GaussianSigmaTest, UnitCase) {
  const double delta = 1.25 * std::exp(-2.0);
  EXPECT_NEAR(GaussianSigma(1.0, {2.0, delta}), 1.0, 1e-15);
}

TEST(GaussianSigmaTest, PinnedConstant) {
  EXPECT_LT(RelErr(GaussianSigma(2.0, {1.0, 1e-5}), kSigmaDelta2), 1e-14);
}

TEST(GaussianSigmaTest, RejectsLargeDelta) {
  EXPECT_THROW(GaussianSigma(1.0, {1.0, 1.25}), DomainError);
  EXPECT_THROW(GaussianEpsilon(1.0, 1.0, 2.0), DomainError);
  EXPECT_THROW(GaussianEpsilon(1.0, 0.0, 1e-5), DomainError);
}

TEST(GaussianEpsilonTest, Examples) {
  EXPECT_EQ(GaussianEpsilon(0.0, 1.0, 1e-5), 0.0);
  EXPECT_NEAR(GaussianEpsilon(1.0, 1.0, 1.25 * std::exp(-2.0)), 2.0, 1e-15);
  const double sigma = GaussianSigma(3.0, {0.7, 1e-5});
  EXPECT_LT(RelErr(GaussianEpsilon(3.0, sigma, 1e-5), 0.7), 1e-14);
}

TEST(GaussianEpsilonTest, RoundTripProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> sens(1e-3, 10.0);
  std::uniform_real_distribution<double> eps(1e-3, 10.0);
  std::uniform_real_distribution<double> log_delta(-12.0, -0.1);
  for (int i = 0; i < 1000; ++i) {
    const double s = sens(rng);
    const PrivacyBudget b{eps(rng), std::pow(10.0, log_delta(rng))};
    EXPECT_LT(RelErr(GaussianEpsilon(s, GaussianSigma(s, b), b.delta), b.epsilon), 1e-12);
  }
}

TEST(AmplifyTest, Examples) {
  const AmplifiedPrivacy zero = AmplifyBySubsampling(0.0, 0.1, 0.5);
  EXPECT_EQ(zero.eps, 0.0);
  EXPECT_DOUBLE_EQ(zero.delta, 0.05);
  const AmplifiedPrivacy a = AmplifyBySubsampling(0.1, 1e-5, 0.01);
  EXPECT_LT(RelErr(a.eps, kAmplified), 1e-14);
  EXPECT_LT(RelErr(a.delta, 1e-7), 1e-15);
  EXPECT_THROW(AmplifyBySubsampling(0.1, 0.0, 1.0), DomainError);
}

TEST(AmplifyTest, LinearUpperBoundOnGrid) {
  for (int i = 1; i <= 1000; ++i) {
    const double eps = i / 1000.0;
    for (double q : {1e-4, 0.01, 0.3, 0.5, 0.99}) {
      EXPECT_LE(AmplifyBySubsampling(eps, 0.0, q).eps, AmplifiedEpsilonUpperBound(eps, q));
    }
  }
  EXPECT_LE(AmplifyBySubsampling(0.9, 0.0, 0.3).eps, 2 * 0.9 * 0.3);
  EXPECT_THROW(AmplifiedEpsilonUpperBound(1.5, 0.1), HypothesisViolation);
}

TEST(ComposeExtendedTest, AllZero) {
  const CompositionResult r = ComposeExtended({{0, 0, 0}, {0, 0, 0}}, 0.01);
  EXPECT_EQ(r.eps_tilde, 0.0);
  EXPECT_DOUBLE_EQ(r.delta_tilde, 0.01);
}

TEST(ComposeExtendedTest, FourEqualSteps) {
  const CompositionResult r =
      ComposeExtended({{0.1, 0.1, 0.1, 0.1}, {0, 0, 0, 0}}, std::exp(-1.0));
  EXPECT_LT(RelErr(r.eps_tilde, kComposedK4), 1e-14);
  const CompositionResult c = ComposeClassical(0.1, 0.0, 4, std::exp(-1.0));
  EXPECT_LT(RelErr(c.eps_tilde, kComposedK4), 1e-14);
}

TEST(ComposeExtendedTest, MixedDeltas) {
  const CompositionResult r = ComposeExtended({{0.0, 0.0}, {0.1, 0.2}}, 0.0);
  EXPECT_NEAR(r.delta_tilde, 0.28, 1e-15);
  EXPECT_EQ(r.eps_tilde, 0.0);
}

TEST(ComposeExtendedTest, RejectsEpsilonAtLeastOne) {
  EXPECT_THROW(ComposeExtended({{0.5, 1.0}, {0, 0}}, 1e-5), HypothesisViolation);
  EXPECT_THROW(ComposeClassical(1.2, 0.0, 3, 1e-5), HypothesisViolation);
  EXPECT_THROW(ComposeExtended({{0.5}, {0, 0}}, 1e-5), DomainError);
}

TEST(ComposeExtendedTest, DeltaTildeDominatesInputs) {
  const CompositionResult r = ComposeExtended({{0.1, 0.2, 0.3}, {1e-3, 5e-2, 2e-2}}, 1e-6);
  EXPECT_GE(r.delta_tilde, 5e-2);
}

TEST(ComposeClassicalTest, Examples) {
  const CompositionResult r = ComposeClassical(0.0, 0.0, 1, 0.05);
  EXPECT_EQ(r.eps_tilde, 0.0);
  EXPECT_DOUBLE_EQ(r.delta_tilde, 0.05);
  const CompositionResult c = ComposeClassical(0.01, 1e-6, 100, 1e-5);
  const CompositionResult e = ComposeExtended(
      {std::vector<double>(100, 0.01), std::vector<double>(100, 1e-6)}, 1e-5);
  EXPECT_LT(RelErr(e.eps_tilde, c.eps_tilde), 1e-12);
  EXPECT_LT(RelErr(e.delta_tilde, c.delta_tilde), 1e-12);
}

TEST(ComposeClassicalTest, ReductionProperty) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> eps(1e-6, 0.999);
  std::uniform_real_distribution<double> log_delta(-12.0, -2.0);
  std::uniform_int_distribution<int> k(1, 10000);
  for (int i = 0; i < 200; ++i) {
    const double e0 = eps(rng);
    const double d0 = std::pow(10.0, log_delta(rng));
    const double dp = std::pow(10.0, log_delta(rng));
    const int kk = k(rng);
    const CompositionResult c = ComposeClassical(e0, d0, kk, dp);
    const CompositionResult x =
        ComposeExtended({std::vector<double>(kk, e0), std::vector<double>(kk, d0)}, dp);
    EXPECT_LT(RelErr(x.eps_tilde, c.eps_tilde), 1e-12);
    EXPECT_LT(RelErr(x.delta_tilde, c.delta_tilde), 1e-12);
  }
}

TEST(ComposeExtendedTest, MonotoneInEachEntry) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eps(0.0, 0.9);
  std::uniform_real_distribution<double> delta(0.0, 1e-3);
  for (int i = 0; i < 200; ++i) {
    PerStepPrivacy steps;
    for (int j = 0; j < 20; ++j) {
      steps.eps.push_back(eps(rng));
      steps.delta.push_back(delta(rng));
    }
    const CompositionResult base = ComposeExtended(steps, 1e-6);
    PerStepPrivacy bumped = steps;
    bumped.eps[i % 20] = std::min(0.95, bumped.eps[i % 20] + 0.05);
    bumped.delta[(i + 7) % 20] += 1e-4;
    const CompositionResult more = ComposeExtended(bumped, 1e-6);
    EXPECT_GE(more.eps_tilde, base.eps_tilde);
    EXPECT_GE(more.delta_tilde, base.delta_tilde);
  }
}

TEST(BDeltaTest, UnitSecondFactor) {
  const double delta = 1.25 / std::exp(1.0);
  EXPECT_NEAR(BDelta(25, 8, 16, delta), std::log(16.0 * 25 * 8 / (16 * delta)), 1e-13);
}

TEST(BDeltaTest, PinnedValue) {
  EXPECT_LT(RelErr(BDelta(100, 1, 1000, 1e-5), kBDelta100), 1e-14);
}

TEST(BDeltaTest, DoublingT) {
  EXPECT_NEAR(BDelta(200, 1, 1000, 1e-5) - BDelta(100, 1, 1000, 1e-5),
              std::log(2.0) * std::log(1.25e5), 1e-11);
}

TEST(BDeltaTest, RejectsSmallArgument) {
  EXPECT_THROW(BDelta(1, 1, 100, 0.5), DomainError);
}

TEST(DefaultsTest, DeltaZeroAndPrime) {
  const double d0 = DefaultDelta0(1000, 10, 500, 1e-5);
  EXPECT_DOUBLE_EQ(12.5 * d0 * 500 * 10 / 1000.0, 0.5e-5);
  const double dp = DefaultDeltaPrime(1000, 10, 500, d0);
  EXPECT_GE(dp, d0 * 500 * 10 / (0.25 * 1000));
  EXPECT_LE(dp, d0 * 500 * 10 / (0.1 * 1000));
  const AccountantParams p = ResolveAccountantParams(1000, 10, 500, 1.0, {1.0, 1e-5}, 1e-12);
  EXPECT_EQ(p.delta_0, 1e-12);
  EXPECT_THROW(ResolveAccountantParams(1000, 600, 500, 1.0, {1.0, 1e-5}), DomainError);
}

TEST(CalibrateTest, ClosedFormAlphaOne) {
  const PrivacyBudget budget{1.0, 1e-5};
  const AccountantParams p = ResolveAccountantParams(1000, 1, 100, 1.0, budget);
  const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(100);
  EXPECT_LT(RelErr(NoiseVarianceClosedForm(ones, p, budget), kVarianceAlphaOne), 1e-13);
}

TEST(CalibrateTest, ExampleConfigViolatesIterationConstraint) {
  const PrivacyBudget budget{1.0, 1e-5};
  const AccountantParams p = ResolveAccountantParams(1000, 1, 100, 1.0, budget);
  try {
    CalibrateNoiseVariance(Eigen::ArrayXd::Ones(100), p, budget);
    FAIL() << "expected ConstraintViolation";
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.iteration(), 1);
  }
}

TEST(CalibrateTest, SqrtBClosedForm) {
  const PrivacyBudget budget{1.0, 1e-5};
  const AccountantParams p = ResolveAccountantParams(1000, 1, 1000, 1.0, budget);
  const Eigen::ArrayXd alphas = PrecomputeAlphas(SqrtOfBNoise{}, PolynomialDecayStep{20, 1}, 1000);
  EXPECT_LT(RelErr(NoiseVarianceClosedForm(alphas, p, budget), kVarianceSqrtB), 1e-12);
}

TEST(CalibrateTest, Homogeneity) {
  const PrivacyBudget budget{0.5, 1e-5};
  const AccountantParams p = ResolveAccountantParams(2000, 500, 400, 1.0, budget);
  const Eigen::ArrayXd alphas = PrecomputeAlphas(SqrtOfBNoise{}, PolynomialDecayStep{20, 1}, 400);
  const double base = CalibrateNoiseVariance(alphas, p, budget);
  EXPECT_LT(RelErr(CalibrateNoiseVariance(3.0 * alphas, p, budget), base / 9.0), 1e-13);
  AccountantParams p2 = p;
  p2.G = 2.5;
  EXPECT_LT(RelErr(CalibrateNoiseVariance(alphas, p2, budget), base * 6.25), 1e-13);
}

TEST(CalibrateTest, ConstraintNamesFirstOffendingIteration) {
  const PrivacyBudget budget{1.0, 1e-5};
  const AccountantParams p = ResolveAccountantParams(2000, 1000, 100, 1.0, budget);
  Eigen::ArrayXd alphas = Eigen::ArrayXd::Ones(100);
  alphas[41] = 1e-3;
  try {
    CalibrateNoiseVariance(alphas, p, budget);
    FAIL() << "expected ConstraintViolation";
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.iteration(), 42);
  }
  alphas = Eigen::ArrayXd::Ones(100);
  alphas[0] = 0.01;
  try {
    CalibrateNoiseVariance(alphas, p, budget);
    FAIL() << "expected ConstraintViolation";
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.iteration(), 1);
  }
  Eigen::ArrayXd low_late = Eigen::ArrayXd::Ones(100);
  low_late.tail(1) = 0.05;
  try {
    CalibrateNoiseVariance(low_late, p, budget);
    FAIL() << "expected ConstraintViolation";
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.iteration(), 100);
  }
}

TEST(AuditTest, HugeSigmaGivesNearZeroEpsilon) {
  const PrivacyBudget budget{1.0, 1e-5};
  const AccountantParams p = ResolveAccountantParams(2000, 100, 50, 1.0, budget);
  const PrivacyBudget got = AuditForward(Eigen::ArrayXd::Ones(50), 1e12, p);
  EXPECT_LT(got.epsilon, 1e-9);
}

TEST(AuditTest, RoundTripAlphaOne) {
  const PrivacyBudget budget{1.0, 1e-5};
  const AccountantParams p = ResolveAccountantParams(2000, 1000, 400, 1.0, budget);
  const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(400);
  const double sigma = std::sqrt(CalibrateNoiseVariance(ones, p, budget));
  const PrivacyBudget got = AuditForward(ones, sigma, p);
  EXPECT_LE(got.epsilon, budget.epsilon);
  EXPECT_LE(got.delta, budget.delta);
  EXPECT_LE(got.delta, 12.5 * p.delta_0 * p.T * p.m / p.n + p.delta_prime);
}

TEST(AuditTest, CalibrationSoundnessProperty) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int64_t> T(50, 3000);
  std::uniform_int_distribution<std::int64_t> batches(2, 12);
  std::uniform_real_distribution<double> eps(0.1, 3.0);
  std::uniform_real_distribution<double> log_delta(-9.0, -3.0);
  std::uniform_real_distribution<double> G(0.1, 5.0);
  int checked = 0;
  for (int i = 0; i < 2000 && checked < 200; ++i) {
    const std::int64_t m = 50;
    const std::int64_t n = m * batches(rng);
    const std::int64_t steps = T(rng);
    const PrivacyBudget budget{eps(rng), std::pow(10.0, log_delta(rng))};
    const Eigen::ArrayXd alphas =
        i % 2 ? PrecomputeAlphas(SqrtOfBNoise{}, PolynomialDecayStep{20, 1}, steps)
              : Eigen::ArrayXd::Ones(steps);
    const AccountantParams p = ResolveAccountantParams(n, m, steps, G(rng), budget);
    double variance = 0.0;
    try {
      variance = CalibrateNoiseVariance(alphas, p, budget);
    } catch (const ConstraintViolation&) {
      continue;
    }
    const PrivacyBudget got = AuditForward(alphas, std::sqrt(variance), p);
    EXPECT_LE(got.epsilon, budget.epsilon);
    EXPECT_LE(got.delta, budget.delta);
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(PrivacyBudgetTest, Validate) {
  EXPECT_NO_THROW((PrivacyBudget{1.0, 1e-5}.Validate()));
  EXPECT_THROW((PrivacyBudget{0.0, 1e-5}.Validate()), DomainError);
  EXPECT_THROW((PrivacyBudget{1.0, 1.0}.Validate()), DomainError);
}

}  // namespace
}  // namespace adpsgd
