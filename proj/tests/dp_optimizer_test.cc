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
#include "adpsgd/dp_optimizer.h"

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "adpsgd/errors.h"
#include "adpsgd/harness.h"

namespace adpsgd {
namespace {

OptimizerConfig BaseConfig() {
  OptimizerConfig c;
  c.eta = 0.1;
  c.T = 50;
  c.m = 10;
  c.sigma = 0.0;
  c.step_schedule = PolynomialDecayStep{20.0, 1.0};
  c.seed = 42;
  return c;
}

Dataset ZeroData(Eigen::Index n, Eigen::Index p) {
  Dataset d;
  d.features = Eigen::MatrixXd::Zero(n, p);
  d.labels = Eigen::VectorXd::Zero(n);
  return d;
}

TEST(PlanNoiseTest, ExplicitSigma) {
  OptimizerConfig c = BaseConfig();
  c.sigma = 0.7;
  const NoisePlan plan = PlanNoise(c, 100);
  EXPECT_EQ(plan.sigma, 0.7);
  EXPECT_DOUBLE_EQ(plan.variance, 0.49);
  EXPECT_FALSE(plan.accountant);
  EXPECT_EQ(plan.alphas.size(), 50);
}

TEST(PlanNoiseTest, BudgetCalibratesAndAudits) {
  OptimizerConfig c = BaseConfig();
  c.sigma.reset();
  c.budget = PrivacyBudget{1.0, 1e-5};
  c.clip = 0.5;
  c.m = 500;
  c.T = 400;
  c.noise_schedule = SqrtOfBNoise{};
  const NoisePlan plan = PlanNoise(c, 2000);
  ASSERT_TRUE(plan.accountant);
  EXPECT_EQ(plan.accountant->G, 0.5);
  EXPECT_DOUBLE_EQ(plan.variance, CalibrateNoiseVariance(plan.alphas, *plan.accountant, *c.budget));
  const PrivacyBudget got = AuditForward(plan.alphas, plan.sigma, *plan.accountant);
  EXPECT_LE(got.epsilon, 1.0);
  EXPECT_LE(got.delta, 1e-5);
  c.gradient_bound = 2.0;
  EXPECT_EQ(PlanNoise(c, 2000).accountant->G, 2.0);
}

TEST(PlanNoiseTest, Errors) {
  OptimizerConfig c = BaseConfig();
  c.sigma.reset();
  EXPECT_THROW(PlanNoise(c, 100), DomainError);
  c.budget = PrivacyBudget{};
  EXPECT_THROW(PlanNoise(c, 100), DomainError);
  c.step_schedule = AdaGradNormStep{};
  c.noise_schedule = SqrtOfBNoise{};
  c.clip = 1.0;
  EXPECT_THROW(PlanNoise(c, 100), IncompatibleSchedule);
  c.sigma = 1.0;
  EXPECT_TRUE(PlanNoise(c, 100).on_the_fly);
  c.m = 101;
  EXPECT_THROW(PlanNoise(c, 100), DomainError);
}

TEST(SamplerTest, BatchesPartitionEachEpoch) {
  MinibatchSampler sampler(23, 5, 3);
  EXPECT_EQ(sampler.batches_per_epoch(), 4);
  std::set<Eigen::Index> seen;
  for (Eigen::Index b = 0; b < 4; ++b) {
    for (Eigen::Index i : sampler.PreparedBatch(b)) {
      EXPECT_TRUE(seen.insert(i).second);
    }
  }
  EXPECT_EQ(seen.size(), 20u);
  for (int k = 0; k < 4; ++k) sampler.Next();
  EXPECT_EQ(sampler.epoch(), 0);
  sampler.Next();
  EXPECT_EQ(sampler.epoch(), 1);
}

TEST(SamplerTest, ChiSquaredUniformity) {
  const Eigen::Index n = 100;
  MinibatchSampler sampler(n, 10, 99);
  std::vector<double> counts(n, 0.0);
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) {
    for (Eigen::Index i : sampler.Next()) counts[static_cast<std::size_t>(i)] += 1.0;
  }
  const double expected = draws * 10.0 / n;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99 degrees of freedom; 99 + 5 sqrt(2 * 99) is far in the upper tail.
  EXPECT_LT(chi2, 99.0 + 5.0 * std::sqrt(198.0));
}

TEST(RunTest, ZeroNoiseMatchesPlainFullBatchDescent) {
  const Dataset data = GenerateSynthetic(40, 10, SyntheticKind::kLinreg, 0.1, 4);
  OptimizerConfig c = BaseConfig();
  c.m = 40;
  c.T = 300;
  c.eta = 0.5;
  const RunLog log = adpsgd::Run(c, LinearRegressionMse{}, data);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(10);
  const Eigen::MatrixXd& x = data.features;
  for (int t = 1; t <= 300; ++t) {
    theta -= c.eta / std::sqrt(20.0 + t) * (x.transpose() * (x * theta - data.labels)) / 40.0;
  }
  EXPECT_LT((log.theta - theta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RunTest, ClippingBoundsReleasedStep) {
  const Dataset data = GenerateSynthetic(50, 5, SyntheticKind::kLinreg, 1.0, 6);
  OptimizerConfig c = BaseConfig();
  c.clip = 0.01;
  c.step_schedule = ConstantStep{1.0};
  c.eta = 1.0;
  c.T = 1;
  const RunLog log = adpsgd::Run(c, LinearRegressionMse{}, data);
  EXPECT_LE(log.theta.norm(), 0.01 * (1 + 1e-12));
  EXPECT_GT(log.records[0].batch_grad_norm, 0.01);
}

TEST(RunTest, AdaGradUsesClippedNorm) {
  const Dataset data = GenerateSynthetic(50, 5, SyntheticKind::kLinreg, 1.0, 6);
  OptimizerConfig c = BaseConfig();
  c.clip = 0.01;
  c.step_schedule = AdaGradNormStep{1.0, 1e-8, std::nullopt};
  c.T = 1;
  const RunLog log = adpsgd::Run(c, LinearRegressionMse{}, data);
  EXPECT_DOUBLE_EQ(log.records[0].b_next, std::sqrt(1.0 + 1e-4));
  c.b_update = BUpdateSource::kRaw;
  const RunLog raw = adpsgd::Run(c, LinearRegressionMse{}, data);
  const double g = raw.records[0].batch_grad_norm;
  EXPECT_DOUBLE_EQ(raw.records[0].b_next, std::sqrt(1.0 + g * g));
}

TEST(RunTest, DeterministicPerSeed) {
  const Dataset data = GenerateSynthetic(60, 4, SyntheticKind::kLogreg, 0.0, 7);
  OptimizerConfig c = BaseConfig();
  c.sigma = 0.3;
  c.noise_schedule = SqrtOfBNoise{};
  const RunLog a = adpsgd::Run(c, LogisticRegression{}, data);
  const RunLog b = adpsgd::Run(c, LogisticRegression{}, data);
  EXPECT_EQ(a.theta, b.theta);
  c.seed = 43;
  EXPECT_NE(adpsgd::Run(c, LogisticRegression{}, data).theta, a.theta);
}

TEST(RunTest, NoiseVarianceMatchesSigma) {
  const Dataset data = ZeroData(10, 2);
  OptimizerConfig c;
  c.eta = 1.0;
  c.T = 100000;
  c.m = 5;
  c.sigma = 1.7;
  c.step_schedule = ConstantStep{1.0};
  const NoisePlan plan = PlanNoise(c, data.n());
  RunState state(Eigen::VectorXd::Zero(2), c.step_schedule, data.n(), c.m, 5);
  Eigen::Array2d sum = Eigen::Array2d::Zero();
  Eigen::Array2d sum_sq = Eigen::Array2d::Zero();
  for (std::int64_t t = 0; t < c.T; ++t) {
    const Eigen::Array2d before = state.theta.array();
    Step(state, c, plan, LinearRegressionMse{}, data);
    const Eigen::Array2d draw = before - state.theta.array();
    sum += draw;
    sum_sq += draw.square();
  }
  const double n = static_cast<double>(c.T);
  const Eigen::Array2d var = (sum_sq - sum.square() / n) / (n - 1);
  EXPECT_TRUE(((var / (1.7 * 1.7) - 1.0).abs() < 0.03).all()) << var.transpose();
}

TEST(RunTest, InjectedNoiseSeriesFollowsSchedule) {
  const Dataset data = GenerateSynthetic(30, 3, SyntheticKind::kLinreg, 0.1, 8);
  OptimizerConfig c = BaseConfig();
  c.sigma = 0.2;
  c.noise_schedule = SqrtOfBNoise{};
  const RunLog log = adpsgd::Run(c, LinearRegressionMse{}, data);
  const std::vector<double> series = InjectedNoiseSeries(log);
  ASSERT_EQ(series.size(), 50u);
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double b = std::sqrt(21.0 + static_cast<double>(t));
    EXPECT_NEAR(series[t], 0.1 / b * std::sqrt(b) * 0.2, 1e-15);
  }
}

TEST(RunTest, SummaryAndSparseFullGradients) {
  const Dataset data = GenerateSynthetic(30, 3, SyntheticKind::kLinreg, 0.1, 8);
  OptimizerConfig c = BaseConfig();
  c.full_grad_every = 7;
  const RunLog log = adpsgd::Run(c, LinearRegressionMse{}, data);
  ASSERT_TRUE(log.summary.tau);
  EXPECT_EQ(*log.summary.tau % 7, 0);
  EXPECT_TRUE(std::isnan(log.records[1].full_grad_norm));
  double best = INFINITY;
  for (const IterationRecord& r : log.records) {
    if (!std::isnan(r.full_grad_norm)) best = std::min(best, r.full_grad_norm * r.full_grad_norm);
  }
  EXPECT_EQ(log.summary.min_grad_norm_sq, best);
  EXPECT_NEAR(log.summary.final_loss, FullLossAndGrad(LinearRegressionMse{}, log.theta, data).loss,
              1e-15);
}

TEST(RunTest, DivergenceKeepsPartialLog) {
  const Dataset data = GenerateSynthetic(30, 3, SyntheticKind::kLinreg, 0.1, 8);
  OptimizerConfig c = BaseConfig();
  c.eta = 1e3;
  c.step_schedule = ConstantStep{1.0};
  c.T = 1000;
  try {
    adpsgd::Run(c, LinearRegressionMse{}, data);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(static_cast<std::int64_t>(e.partial_log().records.size()), e.iteration() + 1);
    EXPECT_LT(e.iteration(), 1000);
  }
}

TEST(RunTest, ZeroIterations) {
  const Dataset data = GenerateSynthetic(30, 3, SyntheticKind::kLinreg, 0.1, 8);
  OptimizerConfig c = BaseConfig();
  c.T = 0;
  const RunLog log = adpsgd::Run(c, LinearRegressionMse{}, data);
  EXPECT_TRUE(log.records.empty());
  EXPECT_FALSE(log.summary.tau);
  EXPECT_EQ(log.theta, Eigen::VectorXd::Zero(3));
}

}  // namespace
}  // namespace adpsgd
