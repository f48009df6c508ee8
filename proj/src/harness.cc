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
#include "adpsgd/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <tuple>

#include "adpsgd/errors.h"

namespace adpsgd {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kBoundProbes = 16;
constexpr double kBoundProbeRadius = 1.0;

double Sq(double x) { return x * x; }

// Sample mean and (n - 1) standard deviation; NaN for an empty sample and a
// zero deviation for a single run.
std::pair<double, double> MeanStd(const std::vector<double>& xs) {
  if (xs.empty()) return {kNaN, kNaN};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += Sq(x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

BoundEvaluation Evaluate(const std::string& name, auto&& fn) {
  BoundEvaluation out;
  out.name = name;
  try {
    out.value = fn();
  } catch (const HypothesisViolation& e) {
    out.value = kNaN;
    out.note = e.what();
  } catch (const DomainError& e) {
    out.value = kNaN;
    out.note = e.what();
  }
  return out;
}

}  // namespace

Eigen::VectorXd SyntheticTruth(std::int64_t p, std::uint64_t seed) {
  if (p < 1) throw DomainError("p must be >= 1");
  std::mt19937_64 rng(SplitMix64(seed ^ 0x7e57'0000'0000'0003ULL));
  std::normal_distribution<double> normal;
  Eigen::VectorXd theta(p);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = normal(rng);
  const double norm = theta.norm();
  if (norm == 0.0) {
    theta.setZero();
    theta(0) = 1.0;
    return theta;
  }
  return theta / norm;
}

Dataset GenerateSynthetic(std::int64_t n, std::int64_t p, SyntheticKind kind,
                          double noise, std::uint64_t seed) {
  if (n < 1 || p < 1) throw DomainError("n and p must be >= 1");
  if (!(noise >= 0.0)) throw DomainError("noise must be non-negative");
  const Eigen::VectorXd truth = SyntheticTruth(p, seed);
  std::mt19937_64 rng(SplitMix64(seed ^ 0xda7a'0000'0000'0004ULL));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  Dataset data;
  data.features.resize(n, p);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) data.features(i, j) = normal(rng);
    const double z = data.features.row(i).dot(truth);
    if (kind == SyntheticKind::kLinreg) {
      data.labels(i) = z + noise * normal(rng);
    } else {
      const double prob = 1.0 / (1.0 + std::exp(-z));
      data.labels(i) = uniform(rng) < prob ? 1.0 : 0.0;
    }
  }
  return data;
}

std::uint64_t DeriveRunSeed(std::uint64_t master_seed, std::string_view arm_id,
                            std::int64_t seed_index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : arm_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = SplitMix64(master_seed);
  x = SplitMix64(x ^ h);
  return SplitMix64(x ^ static_cast<std::uint64_t>(seed_index));
}

Dataset LoadData(const DataSpec& spec) {
  Dataset data = spec.source == DataSpec::Source::kCsv
                     ? ReadDatasetCsv(spec.path)
                     : GenerateSynthetic(spec.n, spec.p, spec.kind, spec.noise, spec.seed);
  data.Validate();
  return data;
}

OptimizerConfig ArmOptimizerConfig(const ExperimentConfig& config, const ArmSpec& arm) {
  OptimizerConfig out = config.optimizer;
  out.step_schedule = arm.step;
  out.noise_schedule = arm.noise;
  return out;
}

BoundInputs ResolveBoundInputs(const ExperimentConfig& config, const Dataset& data) {
  const OptimizerConfig& opt = config.optimizer;
  BoundInputs in;
  in.eta = opt.eta;
  in.T = opt.T;
  in.m = opt.m;
  in.n = data.n();
  in.d = static_cast<double>(ParameterDimension(config.model, data.p()));
  if (opt.budget) {
    in.epsilon = opt.budget->epsilon;
    in.delta = opt.budget->delta;
  } else {
    in.epsilon = kNaN;
    in.delta = kNaN;
  }
  const bool need_estimate =
      !config.bounds.L || (!config.bounds.G && !opt.gradient_bound && !opt.clip);
  std::optional<SmoothnessEstimate> estimate;
  if (need_estimate) {
    estimate = EstimateBounds(config.model, data, kBoundProbes, kBoundProbeRadius,
                              config.data.seed);
  }
  if (config.bounds.L) {
    in.L = *config.bounds.L;
  } else {
    in.L = estimate->exact_L.value_or(estimate->L_hat);
  }
  if (config.bounds.G) {
    in.G = *config.bounds.G;
  } else if (opt.gradient_bound) {
    in.G = *opt.gradient_bound;
  } else if (opt.clip) {
    in.G = *opt.clip;
  } else {
    in.G = estimate->G_hat;
  }
  if (config.bounds.D_F) {
    in.D_F = *config.bounds.D_F;
  } else {
    const Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(in.d));
    in.D_F = FullLossAndGrad(config.model, theta0, data).loss;
  }
  return in;
}

BoundEvaluation EvaluateArmBound(const BoundInputs& inputs, const ArmSpec& arm) {
  if (!std::isfinite(inputs.epsilon)) {
    return {"none", kNaN, "no privacy budget"};
  }
  BoundInputs in = inputs;
  const bool one = std::holds_alternative<ConstantOneNoise>(arm.noise);
  const bool sqrt_b = std::holds_alternative<SqrtOfBNoise>(arm.noise);
  const bool quarter = std::holds_alternative<PolynomialQuarterNoise>(arm.noise);
  if (const auto* poly = std::get_if<PolynomialDecayStep>(&arm.step)) {
    in.a = poly->a;
    in.c = poly->c;
    if (one) return Evaluate("decay_dp", [&] { return BoundDecay(in, Variant::kDp); });
    if (sqrt_b) return Evaluate("decay_adp", [&] { return BoundDecay(in, Variant::kAdp); });
  }
  if (const auto* ada = std::get_if<AdaGradNormStep>(&arm.step)) {
    in.b0 = ada->b0;
    in.nu = ada->nu;
    if (one) return Evaluate("adaptive_dp", [&] { return BoundAdaptive(in, Variant::kDp); });
    if (quarter) {
      const auto& q = std::get<PolynomialQuarterNoise>(arm.noise);
      in.C = q.C;
      return Evaluate("adaptive_adp", [&] { return BoundAdaptive(in, Variant::kAdp); });
    }
    return {"none", kNaN, "alphas depend on the data; no closed form applies"};
  }
  if (const auto* constant = std::get_if<ConstantStep>(&arm.step)) {
    if (one) {
      in.eta = inputs.eta / constant->b;
      return Evaluate("constant", [&] { return BoundConstant(in); });
    }
  }
  return Evaluate("general", [&] {
    const Eigen::ArrayXd bs = PrecomputeBs(arm.step, in.T);
    const Eigen::ArrayXd alphas = PrecomputeAlphas(arm.noise, arm.step, in.T);
    const double worst = Sq(in.G) * bs.square().inverse().sum();
    return UtilityBoundGeneral(in, alphas, bs, worst);
  });
}

ComparisonReport RunComparison(const ExperimentConfig& config) {
  return RunComparison(config, LoadData(config.data));
}

ComparisonReport RunComparison(const ExperimentConfig& config, const Dataset& data) {
  if (config.seeds.empty()) throw ConfigError("at least one seed is required");
  ComparisonReport report;
  report.config = KeyValuesFromConfig(config);

  std::optional<BoundInputs> bound_inputs;
  try {
    bound_inputs = ResolveBoundInputs(config, data);
  } catch (const Error&) {
    bound_inputs.reset();
  }

  struct Task {
    std::size_t arm;
    std::size_t seed;
  };
  std::vector<Task> tasks;
  std::vector<OptimizerConfig> arm_configs;
  std::vector<NoisePlan> plans(config.arms.size());
  report.arms.resize(config.arms.size());
  for (std::size_t a = 0; a < config.arms.size(); ++a) {
    const ArmSpec& arm = config.arms[a];
    ArmReport& ar = report.arms[a];
    ar.id = arm.id;
    ar.step = Describe(arm.step);
    ar.noise = Describe(arm.noise);
    arm_configs.push_back(ArmOptimizerConfig(config, arm));
    if (bound_inputs) {
      const BoundEvaluation be = EvaluateArmBound(*bound_inputs, arm);
      ar.bound_name = be.name;
      ar.bound_value = be.value;
    } else {
      ar.bound_value = kNaN;
    }
    try {
      plans[a] = PlanNoise(arm_configs[a], data.n());
    } catch (const Error& e) {
      ar.error = e.what();
      ar.sigma = kNaN;
      ar.mean_min_grad_norm_sq = ar.std_min_grad_norm_sq = kNaN;
      ar.mean_final_loss = ar.std_final_loss = kNaN;
      continue;
    }
    ar.sigma = plans[a].sigma;
    if (plans[a].accountant) {
      ar.target = config.optimizer.budget;
      ar.achieved = AuditForward(plans[a].alphas, plans[a].sigma, *plans[a].accountant);
    }
    ar.runs.resize(config.seeds.size());
    for (std::size_t s = 0; s < config.seeds.size(); ++s) tasks.push_back({a, s});
  }

  auto execute = [&](const Task& task) {
    const ArmSpec& arm = config.arms[task.arm];
    RunOutcome& out = report.arms[task.arm].runs[task.seed];
    out.seed_index = static_cast<std::int64_t>(task.seed);
    out.seed = DeriveRunSeed(config.seeds[task.seed], arm.id, out.seed_index);
    OptimizerConfig cfg = arm_configs[task.arm];
    cfg.seed = out.seed;
    try {
      out.log = Run(cfg, plans[task.arm], config.model, data);
      out.ok = true;
    } catch (const DivergenceError& e) {
      out.error = e.what();
      out.log = e.partial_log();
    } catch (const Error& e) {
      out.error = e.what();
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(config.workers, 1)),
                            std::max<std::size_t>(tasks.size(), 1));
  if (workers <= 1) {
    for (const Task& task : tasks) execute(task);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
          execute(tasks[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (ArmReport& ar : report.arms) {
    if (!ar.error.empty()) continue;
    std::vector<double> grads;
    std::vector<double> losses;
    for (const RunOutcome& run : ar.runs) {
      if (!run.ok) continue;
      grads.push_back(run.log.summary.min_grad_norm_sq);
      losses.push_back(run.log.summary.final_loss);
    }
    std::tie(ar.mean_min_grad_norm_sq, ar.std_min_grad_norm_sq) = MeanStd(grads);
    std::tie(ar.mean_final_loss, ar.std_final_loss) = MeanStd(losses);
  }
  return report;
}

}  // namespace adpsgd
