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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace adpsgd {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void Summarize(RunLog& log, const ModelSpec& model, const Dataset& data) {
  RunSummary s;
  double best = std::numeric_limits<double>::infinity();
  for (const IterationRecord& r : log.records) {
    if (std::isnan(r.full_grad_norm)) continue;
    const double sq = r.full_grad_norm * r.full_grad_norm;
    if (sq < best) {
      best = sq;
      s.tau = r.t;
    }
  }
  s.min_grad_norm_sq = s.tau ? best : kNaN;
  s.final_grad_norm_sq = kNaN;
  s.final_loss = kNaN;
  if (log.theta.allFinite()) {
    try {
      const LossGrad final_eval = FullLossAndGrad(model, log.theta, data);
      s.final_grad_norm_sq = final_eval.grad.squaredNorm();
      s.final_loss = final_eval.loss;
    } catch (const NumericalError&) {
      // Left as NaN; only reachable on a diverged iterate.
    }
  }
  log.summary = s;
}

}  // namespace

void OptimizerConfig::Validate(Eigen::Index n) const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be positive");
  if (T < 0) throw DomainError("T must be non-negative");
  if (m < 1 || m > n) {
    throw DomainError("mini-batch size m=" + std::to_string(m) +
                      " must lie in [1, n=" + std::to_string(n) + "]");
  }
  if (clip && !(*clip > 0.0)) throw DomainError("clipping radius must be positive");
  if (sigma && !(*sigma >= 0.0)) throw DomainError("sigma must be >= 0");
  if (!sigma && !budget) {
    throw DomainError("either sigma or a privacy budget must be given");
  }
  if (full_grad_every < 1) throw DomainError("full_grad_every must be >= 1");
  adpsgd::Validate(step_schedule);
  adpsgd::Validate(noise_schedule);
}

NoisePlan PlanNoise(const OptimizerConfig& config, Eigen::Index n) {
  config.Validate(n);
  NoisePlan plan;
  if (std::holds_alternative<SqrtOfBNoise>(config.noise_schedule) &&
      IsAdaptive(config.step_schedule)) {
    if (!config.sigma) {
      throw IncompatibleSchedule(
          "calibration needs alphas fixed in advance; alpha_t^2 = b_t with "
          "AdaGrad-Norm is only available with an explicit sigma");
    }
    plan.on_the_fly = true;
  } else {
    plan.alphas = PrecomputeAlphas(config.noise_schedule, config.step_schedule,
                                   config.T);
  }
  if (config.sigma) {
    plan.sigma = *config.sigma;
    plan.variance = plan.sigma * plan.sigma;
    return plan;
  }
  if (config.T == 0) return plan;
  const std::optional<double> G =
      config.gradient_bound ? config.gradient_bound : config.clip;
  if (!G) {
    throw DomainError("calibration needs a gradient bound G or a clipping radius");
  }
  plan.accountant = ResolveAccountantParams(n, config.m, config.T, *G,
                                            *config.budget, config.delta_0,
                                            config.delta_prime);
  plan.variance = CalibrateNoiseVariance(plan.alphas, *plan.accountant, *config.budget);
  plan.sigma = std::sqrt(plan.variance);
  return plan;
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t SamplingSeed(std::uint64_t run_seed) {
  return SplitMix64(run_seed ^ 0x5a17'0000'0000'0001ULL);
}

std::uint64_t NoiseSeed(std::uint64_t run_seed) {
  return SplitMix64(run_seed ^ 0x0015'e000'0000'0002ULL);
}

MinibatchSampler::MinibatchSampler(Eigen::Index n, Eigen::Index m,
                                   std::uint64_t seed)
    : n_(n), m_(m), rng_(seed), permutation_(static_cast<std::size_t>(n)) {
  if (n < 1 || m < 1 || m > n) {
    throw DomainError("sampler needs 1 <= m <= n");
  }
  std::iota(permutation_.begin(), permutation_.end(), Eigen::Index{0});
  Reshuffle();
}

void MinibatchSampler::Reshuffle() {
  std::shuffle(permutation_.begin(), permutation_.end(), rng_);
  draws_in_epoch_ = 0;
  ++epoch_;
}

std::span<const Eigen::Index> MinibatchSampler::PreparedBatch(Eigen::Index i) const {
  if (i < 0 || i >= batches_per_epoch()) throw DomainError("batch index out of range");
  return std::span<const Eigen::Index>(permutation_).subspan(
      static_cast<std::size_t>(i * m_), static_cast<std::size_t>(m_));
}

std::span<const Eigen::Index> MinibatchSampler::Next() {
  if (draws_in_epoch_ == batches_per_epoch()) Reshuffle();
  std::uniform_int_distribution<Eigen::Index> pick(0, batches_per_epoch() - 1);
  last_batch_ = pick(rng_);
  ++draws_in_epoch_;
  return PreparedBatch(last_batch_);
}

RunState::RunState(Eigen::VectorXd theta0, const StepsizeSchedule& schedule,
                   Eigen::Index n, Eigen::Index m, std::uint64_t seed)
    : theta(std::move(theta0)),
      sched(InitialState(schedule)),
      sampler(n, m, SamplingSeed(seed)),
      noise_rng(NoiseSeed(seed)) {}

IterationRecord Step(RunState& state, const OptimizerConfig& config,
                     const NoisePlan& plan, const ModelSpec& model,
                     const Dataset& data) {
  if (state.t >= config.T) throw DomainError("run already finished");
  IterationRecord rec;
  rec.t = state.t;

  if (state.t % config.full_grad_every == 0) {
    const LossGrad full = FullLossAndGrad(model, state.theta, data);
    rec.loss = full.loss;
    rec.full_grad_norm = full.grad.norm();
  } else {
    rec.loss = kNaN;
    rec.full_grad_norm = kNaN;
  }

  const std::span<const Eigen::Index> batch = state.sampler.Next();
  const LossGrad lg = LossAndGrad(model, state.theta, batch, data);
  rec.batch_grad_norm = lg.grad.norm();
  const Eigen::VectorXd released = config.clip ? Clip(lg.grad, *config.clip) : lg.grad;
  const double norm_sq = config.b_update == BUpdateSource::kClipped
                             ? released.squaredNorm()
                             : lg.grad.squaredNorm();

  const double b_next = NextB(config.step_schedule, state.sched, norm_sq);
  const double alpha_next =
      plan.on_the_fly ? NextAlpha(config.noise_schedule, state.sched, b_next)
                      : plan.alphas[state.t];
  rec.b_next = b_next;
  rec.alpha_next = alpha_next;

  const double step_size = config.eta / b_next;
  state.theta -= step_size * released;
  if (plan.sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, plan.sigma);
    Eigen::VectorXd noise(state.theta.size());
    for (Eigen::Index j = 0; j < noise.size(); ++j) noise[j] = normal(state.noise_rng);
    noise *= step_size * alpha_next;
    rec.noise_norm = noise.norm();
    state.theta -= noise;
  }

  state.sched.t = state.t + 1;
  state.sched.b = b_next;
  state.sched.alpha = alpha_next;
  ++state.t;
  return rec;
}

RunLog Run(const OptimizerConfig& config, const ModelSpec& model,
           const Dataset& data, std::optional<Eigen::VectorXd> theta0) {
  return Run(config, PlanNoise(config, data.n()), model, data, std::move(theta0));
}

RunLog Run(const OptimizerConfig& config, const NoisePlan& plan,
           const ModelSpec& model, const Dataset& data,
           std::optional<Eigen::VectorXd> theta0) {
  data.Validate();
  Validate(model, data.p());
  config.Validate(data.n());
  const Eigen::Index d = ParameterDimension(model, data.p());
  Eigen::VectorXd start = theta0 ? std::move(*theta0) : Eigen::VectorXd::Zero(d);
  if (start.size() != d) throw DomainError("theta0 has the wrong dimension");
  if (!plan.on_the_fly && plan.alphas.size() < config.T) {
    throw DomainError("noise plan is shorter than T");
  }

  RunLog log;
  log.eta = config.eta;
  log.sigma = plan.sigma;
  log.records.reserve(static_cast<std::size_t>(config.T));
  RunState state(std::move(start), config.step_schedule, data.n(), config.m,
                 config.seed);
  while (state.t < config.T) {
    log.records.push_back(Step(state, config, plan, model, data));
    const double norm = state.theta.norm();
    if (!std::isfinite(norm) || norm > kDivergenceThreshold) {
      const std::int64_t it = state.t - 1;
      log.theta = state.theta;
      Summarize(log, model, data);
      std::ostringstream os;
      os << "iterate diverged at iteration " << it << " (||theta|| = " << norm << ")";
      throw DivergenceError(os.str(), it, std::move(log));
    }
  }
  log.theta = std::move(state.theta);
  Summarize(log, model, data);
  return log;
}

std::vector<double> InjectedNoiseSeries(const RunLog& log) {
  std::vector<double> series;
  series.reserve(log.records.size());
  for (const IterationRecord& r : log.records) {
    series.push_back(log.eta / r.b_next * r.alpha_next * log.sigma);
  }
  return series;
}

}  // namespace adpsgd
