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
// Experiment orchestration: configuration files, synthetic data, seed-parallel
// DP-SGD vs ADP-SGD comparisons and report emission.
#ifndef ADPSGD_HARNESS_H_
#define ADPSGD_HARNESS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "adpsgd/bounds.h"
#include "adpsgd/dp_optimizer.h"
#include "adpsgd/models.h"
#include "adpsgd/privacy_accountant.h"
#include "adpsgd/schedules.h"

namespace adpsgd {

enum class SyntheticKind { kLinreg, kLogreg };

// Gaussian features; labels x^T theta* + N(0, noise^2) (linreg) or
// Bernoulli(sigmoid(x^T theta*)) (logreg, `noise` unused). theta* is a
// unit vector drawn from `seed`.
Dataset GenerateSynthetic(std::int64_t n, std::int64_t p, SyntheticKind kind,
                          double noise, std::uint64_t seed);

// theta* used by GenerateSynthetic for (p, seed).
Eigen::VectorXd SyntheticTruth(std::int64_t p, std::uint64_t seed);

struct DataSpec {
  enum class Source { kSynthetic, kCsv };
  Source source = Source::kSynthetic;
  std::string path;
  std::int64_t n = 1000;
  std::int64_t p = 10;
  SyntheticKind kind = SyntheticKind::kLinreg;
  double noise = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const DataSpec&) const = default;
};

struct ArmSpec {
  std::string id;
  StepsizeSchedule step = ConstantStep{};
  NoiseScaleSchedule noise = ConstantOneNoise{};

  bool operator==(const ArmSpec&) const = default;
};

struct BoundOverrides {
  std::optional<double> L;
  std::optional<double> G;
  std::optional<double> D_F;

  bool operator==(const BoundOverrides&) const = default;
};

// Flat key-value configuration; see ConfigKeys() for the key list.
// `optimizer` carries everything except the schedules and the seed, which
// come from `arms` and `seeds`.
struct ExperimentConfig {
  DataSpec data;
  ModelSpec model = LinearRegressionMse{};
  OptimizerConfig optimizer;
  std::vector<ArmSpec> arms;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "adpsgd_out";
  int workers = 1;
  BoundOverrides bounds;

  bool operator==(const ExperimentConfig&) const = default;
};

struct ConfigKey {
  std::string_view key;
  std::string_view help;
};

// Static keys. Per-arm keys take the form arm.<id>.schedule.step.* and
// arm.<id>.noise.* with the same suffixes as the single-arm keys.
const std::vector<ConfigKey>& ConfigKeys();

using KeyValues = std::map<std::string, std::string>;

// Parses `key = value` lines; '#' starts a comment line.
KeyValues ParseKeyValues(std::string_view text);
ExperimentConfig ConfigFromKeyValues(const KeyValues& kv);
KeyValues KeyValuesFromConfig(const ExperimentConfig& config);
std::string SerializeConfig(const ExperimentConfig& config);
ExperimentConfig ParseConfig(std::string_view text);
KeyValues LoadKeyValues(const std::string& path);

// Shortest round-trip decimal representation.
std::string FormatDouble(double value);

// hash(master_seed, arm_id, seed_index); reruns of a single arm reproduce
// the grid values.
std::uint64_t DeriveRunSeed(std::uint64_t master_seed, std::string_view arm_id,
                            std::int64_t seed_index);

Dataset LoadData(const DataSpec& spec);

// Optimizer configuration of one arm (schedules filled in, seed unset).
OptimizerConfig ArmOptimizerConfig(const ExperimentConfig& config,
                                   const ArmSpec& arm);

struct RunOutcome {
  std::int64_t seed_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunLog log;
};

struct ArmReport {
  std::string id;
  std::string step;
  std::string noise;
  double sigma = 0.0;
  std::optional<PrivacyBudget> target;
  // Forward audit of the calibrated noise; unset when alphas depend on data.
  std::optional<PrivacyBudget> achieved;
  std::string bound_name = "none";
  double bound_value = 0.0;  // NaN when no bound applies
  std::string error;         // arm-level failure (e.g. calibration)
  std::vector<RunOutcome> runs;
  double mean_min_grad_norm_sq = 0.0;
  double std_min_grad_norm_sq = 0.0;
  double mean_final_loss = 0.0;
  double std_final_loss = 0.0;
};

struct ComparisonReport {
  KeyValues config;
  std::vector<ArmReport> arms;
};

// Evaluates the closed-form bound matching the arm's schedules.
struct BoundEvaluation {
  std::string name = "none";
  double value = 0.0;
  std::string note;
};
BoundEvaluation EvaluateArmBound(const BoundInputs& inputs, const ArmSpec& arm);

// Bound inputs for an experiment (L, G, D_F from overrides or estimates).
BoundInputs ResolveBoundInputs(const ExperimentConfig& config, const Dataset& data);

// Runs every arm over every seed (in parallel when workers > 1); the report
// does not depend on the worker count.
ComparisonReport RunComparison(const ExperimentConfig& config);
ComparisonReport RunComparison(const ExperimentConfig& config, const Dataset& data);

// Writes report.json, summary.csv and runs/<arm>_<seed_index>.{csv,json}.
void EmitReport(const ComparisonReport& report, const std::string& dir);

// CSV columns t,loss,batch_grad_norm,full_grad_norm,b_next,alpha_next,noise_norm.
std::string RunLogCsv(const RunLog& log);
// JSON summary: tau, min_grad_norm_sq, final_grad_norm_sq, config echo,
// achieved budget.
std::string RunSummaryJson(const RunLog& log, const KeyValues& config,
                           const std::optional<PrivacyBudget>& achieved);

struct SummaryRow {
  std::string arm_id;
  double mean = 0.0;
  double std = 0.0;
  double achieved_eps = 0.0;
  double bound_value = 0.0;
};
std::vector<SummaryRow> ReadSummaryCsv(const std::string& path);

// Quick randomized invariant checks; prints one line per check.
bool RunSelfTest(std::ostream& out);

}  // namespace adpsgd

#endif  // ADPSGD_HARNESS_H_
