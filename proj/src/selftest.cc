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
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "adpsgd/harness.h"

namespace adpsgd {
namespace {

constexpr std::uint64_t kSelfTestSeed = 20260101;

bool CompositionReduction(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> eps(1e-4, 0.9);
  std::uniform_real_distribution<double> log_delta(-12.0, -3.0);
  std::uniform_int_distribution<int> k(1, 300);
  for (int i = 0; i < 200; ++i) {
    const double e = eps(rng);
    const double d = std::pow(10.0, log_delta(rng));
    const double dp = std::pow(10.0, log_delta(rng));
    const int kk = k(rng);
    PerStepPrivacy steps{std::vector<double>(kk, e), std::vector<double>(kk, d)};
    const CompositionResult ext = ComposeExtended(steps, dp);
    const CompositionResult cls = ComposeClassical(e, d, kk, dp);
    if (std::abs(ext.eps_tilde - cls.eps_tilde) > 1e-12 * cls.eps_tilde) return false;
    if (std::abs(ext.delta_tilde - cls.delta_tilde) > 1e-12 * cls.delta_tilde) return false;
  }
  return true;
}

bool MOptimality(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> value(0.1, 10.0);
  std::uniform_int_distribution<int> len(1, 200);
  for (int i = 0; i < 200; ++i) {
    const int T = len(rng);
    Eigen::ArrayXd alphas(T);
    Eigen::ArrayXd bs(T);
    for (int t = 0; t < T; ++t) {
      alphas[t] = value(rng);
      bs[t] = value(rng);
    }
    const double opt = MAdp(bs);
    if (MFunctional(alphas, bs) < opt * (1.0 - 1e-12)) return false;
    if (std::abs(MFunctional(bs.sqrt(), bs) - opt) > 1e-10 * opt) return false;
  }
  return true;
}

bool CalibrationSoundness(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> T(200, 3000);
  std::uniform_int_distribution<std::int64_t> batches(4, 12);
  std::uniform_real_distribution<double> eps(0.2, 1.5);
  int checked = 0;
  for (int i = 0; i < 200 && checked < 40; ++i) {
    const std::int64_t m = 100;
    const std::int64_t n = m * batches(rng);
    const std::int64_t steps = T(rng);
    const PrivacyBudget budget{eps(rng), 1e-5};
    const Eigen::ArrayXd alphas = PrecomputeAlphas(SqrtOfBNoise{}, PolynomialDecayStep{}, steps);
    const AccountantParams params = ResolveAccountantParams(n, m, steps, 1.0, budget);
    double variance = 0.0;
    try {
      variance = CalibrateNoiseVariance(alphas, params, budget);
    } catch (const ConstraintViolation&) {
      continue;
    }
    const PrivacyBudget achieved = AuditForward(alphas, std::sqrt(variance), params);
    if (achieved.epsilon > budget.epsilon || achieved.delta > budget.delta) return false;
    ++checked;
  }
  return checked > 0;
}

bool GradientCheck(std::mt19937_64& rng) {
  const Dataset data = GenerateSynthetic(12, 4, SyntheticKind::kLogreg, 0.0, rng());
  const std::vector<ModelSpec> models = {
      LinearRegressionMse{}, LogisticRegression{},
      Mlp{{4, 5, 1}, Activation::kTanh, MlpLoss::kSquared},
      Mlp{{4, 3, 1}, Activation::kTanh, MlpLoss::kLogistic}};
  std::normal_distribution<double> normal(0.0, 0.5);
  for (const ModelSpec& model : models) {
    const Eigen::Index d = ParameterDimension(model, data.p());
    Eigen::VectorXd theta(d);
    for (Eigen::Index i = 0; i < d; ++i) theta[i] = normal(rng);
    const Eigen::VectorXd grad = FullLossAndGrad(model, theta, data).grad;
    Eigen::VectorXd fd(d);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd up = theta;
      Eigen::VectorXd down = theta;
      up[i] += h;
      down[i] -= h;
      fd[i] = (FullLossAndGrad(model, up, data).loss -
               FullLossAndGrad(model, down, data).loss) / (2.0 * h);
    }
    if ((fd - grad).norm() > 1e-5 * std::max(1.0, grad.norm())) return false;
  }
  return true;
}

bool LemmaDominance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.1, 5.0);
  std::uniform_real_distribution<double> power(0.05, 1.0);
  std::uniform_int_distribution<std::int64_t> len(1, 2000);
  for (int i = 0; i < 100; ++i) {
    const double a1 = pos(rng);
    const double a2 = pos(rng);
    const double p = i % 5 == 0 ? 1.0 : power(rng);
    const std::int64_t T = len(rng);
    double sum = 0.0;
    for (std::int64_t t = 1; t <= T; ++t) sum += std::pow(a1 + a2 * t, -p);
    const SumBounds b = SumPowerBounds(a1, a2, p, T);
    if (sum < b.lower * (1.0 - 1e-12) || sum > b.upper * (1.0 + 1e-12)) return false;
    std::vector<double> seq(static_cast<std::size_t>(len(rng) % 50 + 1));
    for (double& x : seq) x = pos(rng);
    seq[0] += 1.0;
    const auto [lhs, rhs] = LogsumBound(seq);
    if (lhs > rhs) return false;
  }
  return true;
}

bool ConfigRoundTrip() {
  ExperimentConfig config;
  config.optimizer.budget = PrivacyBudget{1.5, 1e-6};
  config.optimizer.clip = 1.0;
  config.arms = {{"dp", PolynomialDecayStep{20.0, 1.0}, ConstantOneNoise{}},
                 {"adp", PolynomialDecayStep{20.0, 1.0}, SqrtOfBNoise{}},
                 {"ada", AdaGradNormStep{1.0, 1e-5, GradientBoost{}},
                  PolynomialQuarterNoise{1.0, 0.01}}};
  config.seeds = {1, 2, 18446744073709551615ULL};
  return ParseConfig(SerializeConfig(config)) == config;
}

}  // namespace

bool RunSelfTest(std::ostream& out) {
  std::mt19937_64 rng(kSelfTestSeed);
  struct Check {
    const char* name;
    bool ok;
  };
  std::vector<Check> checks;
  auto run = [&](const char* name, auto&& fn) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      out << "error in " << name << ": " << e.what() << "\n";
    }
    out << (ok ? "PASS " : "FAIL ") << name << "\n";
    checks.push_back({name, ok});
  };
  run("composition_reduction", [&] { return CompositionReduction(rng); });
  run("m_optimality", [&] { return MOptimality(rng); });
  run("calibration_soundness", [&] { return CalibrationSoundness(rng); });
  run("gradient_finite_difference", [&] { return GradientCheck(rng); });
  run("lemma_dominance", [&] { return LemmaDominance(rng); });
  run("config_round_trip", [] { return ConfigRoundTrip(); });
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; });
}

}  // namespace adpsgd
