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
// The (A)DP-SGD loop. Each iteration t releases
//
//   g_t = (eta / b_{t+1}) (clip(grad f(theta_t; B_xi_t)) + alpha_{t+1} c_t),
//   c_t ~ N(0, sigma^2 I_d),
//
// and sets theta_{t+1} = theta_t - g_t. alpha = 1 gives plain DP-SGD.
#ifndef ADPSGD_DP_OPTIMIZER_H_
#define ADPSGD_DP_OPTIMIZER_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adpsgd/errors.h"
#include "adpsgd/models.h"
#include "adpsgd/privacy_accountant.h"
#include "adpsgd/schedules.h"

namespace adpsgd {

enum class BUpdateSource {
  kClipped,  // b_{t+1} is driven by the released (clipped) gradient norm
  kRaw,      // ablation: raw batch-gradient norm
};

struct OptimizerConfig {
  double eta = 1.0;
  std::int64_t T = 100;
  std::int64_t m = 1;
  std::optional<double> clip;  // C_G
  StepsizeSchedule step_schedule = ConstantStep{};
  NoiseScaleSchedule noise_schedule = ConstantOneNoise{};
  // Per-step noise standard deviation. If unset, `budget` is required and
  // sigma is calibrated with CalibrateNoiseVariance.
  std::optional<double> sigma;
  std::optional<PrivacyBudget> budget;
  // Gradient bound G used for calibration; defaults to `clip`.
  std::optional<double> gradient_bound;
  std::optional<double> delta_0;
  std::optional<double> delta_prime;
  std::uint64_t seed = 0;
  BUpdateSource b_update = BUpdateSource::kClipped;
  // Compute ||grad F(theta_t)|| every k-th iteration (NaN otherwise).
  std::int64_t full_grad_every = 1;

  void Validate(Eigen::Index n) const;
  bool operator==(const OptimizerConfig&) const = default;
};

// Noise parameters resolved for a run: alpha_1..alpha_T (empty when alpha is
// computed on the fly from an adaptive b), sigma and, when calibrated, the
// accountant parameters used.
struct NoisePlan {
  Eigen::ArrayXd alphas;
  bool on_the_fly = false;
  double sigma = 0.0;
  double variance = 0.0;
  std::optional<AccountantParams> accountant;
};

// Fixes alphas in advance and resolves sigma (given or calibrated).
NoisePlan PlanNoise(const OptimizerConfig& config, Eigen::Index n);

// Mini-batch sampler. Each epoch shuffles the indices and prepares floor(n/m)
// disjoint batches of exactly m indices (the n mod m leftovers sit out that
// epoch); each draw picks one prepared batch uniformly at random. A new
// epoch starts after floor(n/m) draws.
class MinibatchSampler {
 public:
  MinibatchSampler(Eigen::Index n, Eigen::Index m, std::uint64_t seed);

  std::span<const Eigen::Index> Next();
  // Index of the batch returned by the last call to Next().
  Eigen::Index last_batch_index() const { return last_batch_; }
  Eigen::Index batches_per_epoch() const { return n_ / m_; }
  // Batch `i` of the current epoch.
  std::span<const Eigen::Index> PreparedBatch(Eigen::Index i) const;
  std::int64_t epoch() const { return epoch_; }

 private:
  void Reshuffle();

  Eigen::Index n_;
  Eigen::Index m_;
  std::mt19937_64 rng_;
  std::vector<Eigen::Index> permutation_;
  Eigen::Index draws_in_epoch_ = 0;
  Eigen::Index last_batch_ = -1;
  std::int64_t epoch_ = -1;
};

struct IterationRecord {
  std::int64_t t = 0;
  double loss = 0.0;             // F(theta_t), NaN when not evaluated
  double batch_grad_norm = 0.0;  // raw batch gradient norm
  double full_grad_norm = 0.0;   // ||grad F(theta_t)||, NaN when not evaluated
  double b_next = 0.0;
  double alpha_next = 0.0;
  double noise_norm = 0.0;       // ||(eta / b_{t+1}) alpha_{t+1} c_t||
};

struct RunSummary {
  std::optional<std::int64_t> tau;  // argmin_t full_grad_norm^2
  double min_grad_norm_sq = 0.0;
  double final_grad_norm_sq = 0.0;  // at theta_T
  double final_loss = 0.0;          // F(theta_T)
};

struct RunLog {
  std::vector<IterationRecord> records;
  RunSummary summary;
  Eigen::VectorXd theta;  // final parameters
  double eta = 0.0;
  double sigma = 0.0;
};

// Thrown when theta becomes non-finite or ||theta|| > 1e12. Carries the log
// up to and including the offending iteration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::int64_t iteration, RunLog partial)
      : Error(what), iteration_(iteration), partial_(std::move(partial)) {}
  std::int64_t iteration() const { return iteration_; }
  const RunLog& partial_log() const { return partial_; }

 private:
  std::int64_t iteration_;
  RunLog partial_;
};

constexpr double kDivergenceThreshold = 1e12;

// Mutable state of one run. Batch sampling and Gaussian noise use separate
// generator streams derived from the seed, so the noise sequence does not
// depend on m.
struct RunState {
  Eigen::VectorXd theta;
  ScheduleState sched;
  std::int64_t t = 0;
  MinibatchSampler sampler;
  std::mt19937_64 noise_rng;

  RunState(Eigen::VectorXd theta0, const StepsizeSchedule& schedule,
           Eigen::Index n, Eigen::Index m, std::uint64_t seed);
};

// Derives independent stream seeds from a run seed.
std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t SamplingSeed(std::uint64_t run_seed);
std::uint64_t NoiseSeed(std::uint64_t run_seed);

// One iteration. `plan` supplies alpha_{t+1} (or on-the-fly mode) and sigma.
IterationRecord Step(RunState& state, const OptimizerConfig& config,
                     const NoisePlan& plan, const ModelSpec& model,
                     const Dataset& data);

// Executes T iterations from theta0 (zeros when omitted).
RunLog Run(const OptimizerConfig& config, const ModelSpec& model,
           const Dataset& data,
           std::optional<Eigen::VectorXd> theta0 = std::nullopt);

// Same, with a precomputed noise plan.
RunLog Run(const OptimizerConfig& config, const NoisePlan& plan,
           const ModelSpec& model, const Dataset& data,
           std::optional<Eigen::VectorXd> theta0 = std::nullopt);

// Per-step standard deviation of the noise actually added to theta:
// (eta / b_{t+1}) alpha_{t+1} sigma.
std::vector<double> InjectedNoiseSeries(const RunLog& log);

}  // namespace adpsgd

#endif  // ADPSGD_DP_OPTIMIZER_H_
