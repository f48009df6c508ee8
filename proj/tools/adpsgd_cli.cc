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
// adpsgd command line:
//   adpsgd calibrate [config] [--<key> value] [--set key=value] [--seed N]
//   adpsgd run       [config] [--arm ID] ...
//   adpsgd compare   [config] ...
//   adpsgd bounds    [config] ...
//   adpsgd selftest
// Exit status: 0 on success, 2 on hypothesis violations, 1 otherwise.
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adpsgd/harness.h"
#include "json.hpp"

namespace {

using adpsgd::KeyValues;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitHypothesis = 2;

ordered_json Number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

// Config sources shared by every experiment subcommand.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> flag_options;
};

void AddConfigOptions(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("config", args.path, "key = value configuration file");
  cmd->add_option("--set", args.sets, "override a configuration key (key=value)");
  cmd->add_option("--seed", args.seed, "replace the seed list with a single master seed");
  for (const adpsgd::ConfigKey& key : adpsgd::ConfigKeys()) {
    const std::string name(key.key);
    args.flag_options[name] =
        cmd->add_option("--" + name, args.flags[name], std::string(key.help));
  }
}

adpsgd::ExperimentConfig ResolveConfig(const ConfigArgs& args) {
  KeyValues kv;
  if (!args.path.empty()) kv = adpsgd::LoadKeyValues(args.path);
  for (const auto& [name, option] : args.flag_options) {
    if (option->count() > 0) kv[name] = args.flags.at(name);
  }
  for (const std::string& set : args.sets) {
    const auto eq = set.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw adpsgd::ConfigError("--set expects key=value, got '" + set + "'");
    }
    kv[set.substr(0, eq)] = set.substr(eq + 1);
  }
  if (args.seed) kv["seeds"] = std::to_string(*args.seed);
  return adpsgd::ConfigFromKeyValues(kv);
}

ordered_json BudgetJson(const std::optional<adpsgd::PrivacyBudget>& b) {
  if (!b) return nullptr;
  return ordered_json{{"epsilon", Number(b->epsilon)}, {"delta", Number(b->delta)}};
}

int Calibrate(const ConfigArgs& args) {
  const adpsgd::ExperimentConfig config = ResolveConfig(args);
  const adpsgd::Dataset data = adpsgd::LoadData(config.data);
  ordered_json out = ordered_json::array();
  int status = kExitOk;
  for (const adpsgd::ArmSpec& arm : config.arms) {
    ordered_json a;
    a["id"] = arm.id;
    a["step"] = adpsgd::Describe(arm.step);
    a["noise"] = adpsgd::Describe(arm.noise);
    try {
      const adpsgd::NoisePlan plan =
          adpsgd::PlanNoise(adpsgd::ArmOptimizerConfig(config, arm), data.n());
      a["sigma"] = Number(plan.sigma);
      a["variance"] = Number(plan.variance);
      a["target"] = BudgetJson(config.optimizer.budget);
      std::optional<adpsgd::PrivacyBudget> achieved;
      if (plan.accountant) {
        achieved = adpsgd::AuditForward(plan.alphas, plan.sigma, *plan.accountant);
        a["delta_0"] = plan.accountant->delta_0;
        a["delta_prime"] = plan.accountant->delta_prime;
      }
      a["achieved_composition_audit"] = BudgetJson(achieved);
    } catch (const adpsgd::HypothesisViolation& e) {
      a["error"] = e.what();
      status = kExitHypothesis;
    }
    out.push_back(std::move(a));
  }
  std::cout << out.dump(2) << "\n";
  return status;
}

void PrintSummary(const adpsgd::ComparisonReport& report) {
  std::cout << std::left << std::setw(12) << "arm" << std::setw(26) << "schedule"
            << std::setw(14) << "sigma" << std::setw(30) << "min ||grad F||^2 (mean+-std)"
            << std::setw(22) << "achieved eps" << "bound\n";
  for (const adpsgd::ArmReport& arm : report.arms) {
    std::ostringstream sched;
    sched << arm.step << "/" << arm.noise;
    std::ostringstream grad;
    grad << std::setprecision(4) << arm.mean_min_grad_norm_sq << "+-"
         << arm.std_min_grad_norm_sq;
    std::cout << std::left << std::setw(12) << arm.id << std::setw(26) << sched.str()
              << std::setw(14) << std::setprecision(5) << arm.sigma << std::setw(30)
              << grad.str() << std::setw(22)
              << (arm.achieved ? adpsgd::FormatDouble(arm.achieved->epsilon) : "n/a")
              << arm.bound_name << "=" << arm.bound_value << "\n";
    if (!arm.error.empty()) std::cout << "  error: " << arm.error << "\n";
    for (const adpsgd::RunOutcome& run : arm.runs) {
      if (!run.ok) std::cout << "  run " << run.seed_index << " failed: " << run.error << "\n";
    }
  }
}

int Compare(const adpsgd::ExperimentConfig& config) {
  const adpsgd::ComparisonReport report = adpsgd::RunComparison(config);
  adpsgd::EmitReport(report, config.output_dir);
  PrintSummary(report);
  std::cout << "report written to " << config.output_dir << "\n";
  return kExitOk;
}

int RunSingle(const ConfigArgs& args, const std::string& arm_id) {
  adpsgd::ExperimentConfig config = ResolveConfig(args);
  auto it = config.arms.begin();
  if (!arm_id.empty()) {
    it = std::find_if(config.arms.begin(), config.arms.end(),
                      [&](const adpsgd::ArmSpec& a) { return a.id == arm_id; });
    if (it == config.arms.end()) throw adpsgd::ConfigError("no arm named '" + arm_id + "'");
  }
  config.arms = {*it};
  return Compare(config);
}

ordered_json EvaluationJson(const adpsgd::BoundEvaluation& e) {
  ordered_json out{{"name", e.name}, {"value", Number(e.value)}};
  if (!e.note.empty()) out["note"] = e.note;
  return out;
}

template <typename Fn>
ordered_json TryBound(Fn&& fn) {
  try {
    return Number(fn());
  } catch (const adpsgd::HypothesisViolation& e) {
    return ordered_json{{"error", e.what()}};
  }
}

int Bounds(const ConfigArgs& args) {
  const adpsgd::ExperimentConfig config = ResolveConfig(args);
  const adpsgd::Dataset data = adpsgd::LoadData(config.data);
  const adpsgd::BoundInputs in = adpsgd::ResolveBoundInputs(config, data);
  ordered_json out;
  out["inputs"] = {{"G", in.G},   {"L", in.L},       {"D_F", in.D_F},
                   {"eta", in.eta}, {"d", in.d},     {"n", in.n},
                   {"m", in.m},   {"epsilon", Number(in.epsilon)},
                   {"delta", Number(in.delta)},      {"T", in.T}};
  out["arms"] = ordered_json::object();
  for (const adpsgd::ArmSpec& arm : config.arms) {
    out["arms"][arm.id] = EvaluationJson(adpsgd::EvaluateArmBound(in, arm));
  }
  if (std::isfinite(in.epsilon)) {
    adpsgd::BoundInputs fam = in;
    for (const adpsgd::ArmSpec& arm : config.arms) {
      if (const auto* p = std::get_if<adpsgd::PolynomialDecayStep>(&arm.step)) {
        fam.a = p->a;
        fam.c = p->c;
      }
      if (const auto* a = std::get_if<adpsgd::AdaGradNormStep>(&arm.step)) {
        fam.b0 = a->b0;
        fam.nu = a->nu;
      }
    }
    using adpsgd::Variant;
    out["closed_forms"] = {
        {"decay_adp", TryBound([&] { return adpsgd::BoundDecay(fam, Variant::kAdp); })},
        {"decay_dp", TryBound([&] { return adpsgd::BoundDecay(fam, Variant::kDp); })},
        {"adaptive_adp", TryBound([&] { return adpsgd::BoundAdaptive(fam, Variant::kAdp); })},
        {"adaptive_dp", TryBound([&] { return adpsgd::BoundAdaptive(fam, Variant::kDp); })},
        {"constant", TryBound([&] { return adpsgd::BoundConstant(fam); })},
    };
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private SGD with adaptive noise"};
  app.require_subcommand(1);

  ConfigArgs calibrate_args;
  ConfigArgs run_args;
  ConfigArgs compare_args;
  ConfigArgs bounds_args;
  std::string arm_id;

  CLI::App* calibrate = app.add_subcommand("calibrate", "budget to sigma, with audit");
  AddConfigOptions(calibrate, calibrate_args);
  CLI::App* run = app.add_subcommand("run", "run a single arm over all seeds");
  AddConfigOptions(run, run_args);
  run->add_option("--arm", arm_id, "arm id (defaults to the first arm)");
  CLI::App* compare = app.add_subcommand("compare", "run the full arm x seed grid");
  AddConfigOptions(compare, compare_args);
  CLI::App* bounds = app.add_subcommand("bounds", "evaluate closed-form utility bounds");
  AddConfigOptions(bounds, bounds_args);
  CLI::App* selftest = app.add_subcommand("selftest", "randomized invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (calibrate->parsed()) return Calibrate(calibrate_args);
    if (run->parsed()) return RunSingle(run_args, arm_id);
    if (compare->parsed()) return Compare(ResolveConfig(compare_args));
    if (bounds->parsed()) return Bounds(bounds_args);
    if (selftest->parsed()) return adpsgd::RunSelfTest(std::cout) ? kExitOk : kExitError;
  } catch (const adpsgd::HypothesisViolation& e) {
    std::cerr << "hypothesis violation: " << e.what() << "\n";
    return kExitHypothesis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
